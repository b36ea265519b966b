use super::param::{join, Param};
use crate::error::{Error, Result};
use crate::math::{axpy, dot, Activation, Rng, Tensor};

/// How the window treats the sequence ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Window centred on each position (`c` must be odd); zero vectors
    /// beyond the ends; output length equals input length.
    Same,
    /// Only full windows; output length is `T - c + 1`. Any `c >= 1`.
    Valid,
}

/// Windowed convolution over a sequence of vectors:
/// `x^C_i = f(W_C [x_h]_{h in window(i)} + b_C)`.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub weight: Param,
    pub bias: Param,
    pub window: usize,
    pub padding: Padding,
    pub activation: Activation,
    d_in: usize,
    cache: Vec<(Tensor, Tensor)>,
}

impl ConvLayer {
    pub fn new(
        d_in: usize,
        d_out: usize,
        window: usize,
        padding: Padding,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::check_window(window, padding)?;
        if d_in == 0 || d_out == 0 {
            return Err(Error::config("convolution dimensions must be positive"));
        }
        Ok(ConvLayer {
            weight: Param::glorot(d_out, window * d_in, rng),
            bias: Param::zeros(&[d_out]),
            window,
            padding,
            activation,
            d_in,
            cache: Vec::new(),
        })
    }

    pub fn from_params(
        weight: Tensor,
        bias: Tensor,
        window: usize,
        padding: Padding,
        activation: Activation,
    ) -> Result<Self> {
        Self::check_window(window, padding)?;
        let s = weight.shape();
        if s.len() != 2 || s[1] % window != 0 || bias.shape() != [s[0]] {
            return Err(Error::dim("conv", s, bias.shape()));
        }
        let d_in = s[1] / window;
        Ok(ConvLayer {
            weight: Param::new(weight),
            bias: Param::new(bias),
            window,
            padding,
            activation,
            d_in,
            cache: Vec::new(),
        })
    }

    fn check_window(window: usize, padding: Padding) -> Result<()> {
        if window == 0 {
            return Err(Error::config("convolution window must be at least 1"));
        }
        if padding == Padding::Same && window % 2 == 0 {
            return Err(Error::config(format!(
                "centred convolution window must be odd, got {window}"
            )));
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn output_len(&self, t: usize) -> Result<usize> {
        match self.padding {
            Padding::Same => Ok(t),
            Padding::Valid if t >= self.window => Ok(t - self.window + 1),
            Padding::Valid => Err(Error::config(format!(
                "sequence of length {t} is shorter than the convolution window {}",
                self.window
            ))),
        }
    }

    /// Input row feeding slot `k` of output position `i`, if inside the sequence.
    #[inline]
    fn source(&self, i: usize, k: usize, t: usize) -> Option<usize> {
        let pos = match self.padding {
            Padding::Same => (i + k) as isize - (self.window / 2) as isize,
            Padding::Valid => (i + k) as isize,
        };
        (pos >= 0 && (pos as usize) < t).then_some(pos as usize)
    }

    fn gather(&self, xs: &Tensor, i: usize, buf: &mut [f64]) {
        let d = self.d_in;
        let t = xs.rows();
        for k in 0..self.window {
            let slot = &mut buf[k * d..(k + 1) * d];
            match self.source(i, k, t) {
                Some(p) => slot.copy_from_slice(xs.row(p)),
                None => slot.fill(0.0),
            }
        }
    }

    pub fn compute(&self, xs: &Tensor) -> Result<Tensor> {
        if xs.shape().len() != 2 || xs.cols() != self.d_in {
            return Err(Error::dim("conv", self.weight.value.shape(), xs.shape()));
        }
        let t = xs.rows();
        let n_out = self.output_len(t)?;
        let d_out = self.d_out();
        let width = self.window * self.d_in;
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut buf = vec![0.0; width];
        let mut out = vec![0.0; n_out * d_out];
        for i in 0..n_out {
            self.gather(xs, i, &mut buf);
            let o = &mut out[i * d_out..(i + 1) * d_out];
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = self
                    .activation
                    .apply(b[j] + dot(&w[j * width..(j + 1) * width], &buf));
            }
        }
        Tensor::matrix(n_out, d_out, out)
    }

    pub fn forward(&mut self, xs: &Tensor) -> Result<Tensor> {
        let y = self.compute(xs)?;
        self.cache.push((xs.clone(), y.clone()));
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let (xs, ys) = self
            .cache
            .pop()
            .ok_or(Error::State("conv backward called without a recorded forward"))?;
        ys.same_shape("conv backward", dy)?;
        let t = xs.rows();
        let d = self.d_in;
        let d_out = self.d_out();
        let width = self.window * d;
        let mut dx = Tensor::zeros(&[t, d]);
        let mut buf = vec![0.0; width];
        let mut dwin = vec![0.0; width];
        let mut dz = vec![0.0; d_out];
        for i in 0..ys.rows() {
            for (j, dzj) in dz.iter_mut().enumerate() {
                *dzj = dy.row(i)[j] * self.activation.derivative_from_output(ys.row(i)[j]);
            }
            if dz.iter().all(|&v| v == 0.0) {
                continue;
            }
            self.gather(&xs, i, &mut buf);
            if self.weight.trainable {
                let gw = self.weight.grad.data_mut();
                for (j, &g) in dz.iter().enumerate() {
                    if g != 0.0 {
                        axpy(g, &buf, &mut gw[j * width..(j + 1) * width]);
                    }
                }
            }
            if self.bias.trainable {
                axpy(1.0, &dz, self.bias.grad.data_mut());
            }
            dwin.fill(0.0);
            let w = self.weight.value.data();
            for (j, &g) in dz.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &w[j * width..(j + 1) * width], &mut dwin);
                }
            }
            for k in 0..self.window {
                if let Some(p) = self.source(i, k, t) {
                    axpy(1.0, &dwin[k * d..(k + 1) * d], dx.row_mut(p));
                }
            }
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
