use super::param::{join, Param};
use crate::error::{Error, Result};
use crate::math::{affine_into, axpy, Activation, Rng, Tensor};

/// Position-wise `y = f(W x + b)` applied to every row of a `[T x d_in]`
/// sequence. With `T = 1` it is an ordinary dense layer.
///
/// Training forwards push their activations on a stack; `backward` pops
/// them in reverse order, so one layer may be applied several times per
/// example (shared weights) before backpropagating.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub activation: Activation,
    cache: Vec<(Tensor, Tensor)>,
}

/// The per-token embedding layer `x^E = f(W_E x + b_E)`.
pub type EmbeddingLayer = Dense;

impl Dense {
    pub fn new(d_in: usize, d_out: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::config("dense layer dimensions must be positive"));
        }
        Ok(Dense {
            weight: Param::glorot(d_out, d_in, rng),
            bias: Param::zeros(&[d_out]),
            activation,
            cache: Vec::new(),
        })
    }

    pub fn from_params(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim("dense", weight.shape(), bias.shape()));
        }
        Ok(Dense {
            weight: Param::new(weight),
            bias: Param::new(bias),
            activation,
            cache: Vec::new(),
        })
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn compute(&self, xs: &Tensor) -> Result<Tensor> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        if xs.shape().len() != 2 || xs.cols() != d_in {
            return Err(Error::dim("dense", self.weight.value.shape(), xs.shape()));
        }
        let t = xs.rows();
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut out = Vec::with_capacity(t * d_out);
        for r in 0..t {
            let start = out.len();
            out.extend_from_slice(b);
            let o = &mut out[start..];
            affine_into(w, d_in, xs.row(r), o);
            o.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        }
        Tensor::matrix(t, d_out, out)
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
            .ok_or(Error::State("dense backward called without a recorded forward"))?;
        ys.same_shape("dense backward", dy)?;
        let (d_in, d_out) = (self.d_in(), self.d_out());
        let t = xs.rows();
        let mut dx = Tensor::zeros(&[t, d_in]);
        let mut dz = vec![0.0; d_out];
        for r in 0..t {
            for (k, dzk) in dz.iter_mut().enumerate() {
                *dzk = dy.row(r)[k] * self.activation.derivative_from_output(ys.row(r)[k]);
            }
            let x = xs.row(r);
            if self.weight.trainable {
                let gw = self.weight.grad.data_mut();
                for (k, &d) in dz.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, x, &mut gw[k * d_in..(k + 1) * d_in]);
                    }
                }
            }
            if self.bias.trainable {
                axpy(1.0, &dz, self.bias.grad.data_mut());
            }
            let w = self.weight.value.data();
            let dxr = dx.row_mut(r);
            for (k, &d) in dz.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &w[k * d_in..(k + 1) * d_in], dxr);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_identity_example() {
        let d = Dense::from_params(Tensor::eye(2), Tensor::zeros(&[2]), Activation::Relu).unwrap();
        let y = d.compute(&Tensor::matrix(1, 2, vec![-1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn zero_params_give_zero_tanh() {
        let d = Dense::from_params(Tensor::zeros(&[3, 2]), Tensor::zeros(&[3]), Activation::Tanh).unwrap();
        let y = d.compute(&Tensor::matrix(2, 2, vec![5.0, -1.0, 0.3, 9.0]).unwrap()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.shape(), &[2, 3]);
    }

    #[test]
    fn bias_gradient_of_first_output_is_unit_vector() {
        let mut rng = Rng::new(1);
        let mut d = Dense::new(3, 2, Activation::Identity, &mut rng).unwrap();
        d.forward(&Tensor::matrix(1, 3, vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        d.backward(&Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(d.bias.grad.data(), &[1.0, 0.0]);
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut d = Dense::new(2, 2, Activation::Tanh, &mut Rng::new(0)).unwrap();
        let err = d.backward(&Tensor::zeros(&[1, 2])).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }
}
