//! Single-layer networks for gradient verification.
//!
//! A probe treats its input as a trainable parameter (so the input gradient
//! is checked alongside the layer's own), runs one layer, averages the
//! output over time and feeds a softmax head.

use super::conv::{ConvLayer, Padding};
use super::dense::Dense;
use super::dropout::apply_mask;
use super::lstm::LstmCell;
use super::model::{Classifier, SoftmaxHead};
use super::param::{Param, Parameterized};
use super::pool::MaxPoolTime;
use crate::error::{Error, Result};
use crate::math::{Activation, Rng, Tensor};

#[derive(Debug, Clone)]
pub enum ProbeLayer {
    Dense(Dense),
    Conv(ConvLayer),
    MaxPool(MaxPoolTime),
    Lstm(LstmCell),
    /// Dropout with a frozen mask, which makes it a fixed linear map.
    Dropout(Tensor),
    /// No layer: exercises the softmax head alone.
    Identity,
}

#[derive(Debug, Clone)]
pub struct LayerProbe {
    input: Param,
    layer: ProbeLayer,
    head: SoftmaxHead,
    out_rows: Option<usize>,
}

fn random_input(t: usize, d: usize, rng: &mut Rng) -> Param {
    // Values bounded away from zero so ReLU pre-activations at the identity
    // layer never sit on the kink.
    let data = (0..t * d)
        .map(|_| {
            let v = rng.uniform_range(0.2, 1.0);
            if rng.bernoulli(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Param::new(Tensor::matrix(t, d, data).expect("non-zero dims"))
}

impl LayerProbe {
    pub fn new(layer: ProbeLayer, t: usize, d_in: usize, d_out: usize, rng: &mut Rng) -> Result<Self> {
        Ok(LayerProbe {
            input: random_input(t, d_in, rng),
            layer,
            head: SoftmaxHead::new(d_out, rng)?,
            out_rows: None,
        })
    }

    pub fn dense(act: Activation, rng: &mut Rng) -> Result<Self> {
        let layer = Dense::new(5, 4, act, rng)?;
        Self::new(ProbeLayer::Dense(layer), 3, 5, 4, rng)
    }

    pub fn conv(window: usize, padding: Padding, act: Activation, rng: &mut Rng) -> Result<Self> {
        let layer = ConvLayer::new(3, 4, window, padding, act, rng)?;
        Self::new(ProbeLayer::Conv(layer), 6, 3, 4, rng)
    }

    pub fn maxpool(rng: &mut Rng) -> Result<Self> {
        Self::new(ProbeLayer::MaxPool(MaxPoolTime::new()), 6, 5, 5, rng)
    }

    pub fn lstm(rng: &mut Rng) -> Result<Self> {
        let cell = LstmCell::new(3, 4, rng)?;
        // Non-zero biases so every gate path carries gradient.
        let mut probe = Self::new(ProbeLayer::Lstm(cell), 4, 3, 4, rng)?;
        if let ProbeLayer::Lstm(cell) = &mut probe.layer {
            cell.visit_mut("", &mut |n, p| {
                if n.starts_with("b_") {
                    for v in p.value.data_mut() {
                        *v = rng.uniform_range(-0.5, 0.5);
                    }
                }
            });
        }
        Ok(probe)
    }

    pub fn dropout(rate: f64, rng: &mut Rng) -> Result<Self> {
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..4 * 5)
            .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
            .collect();
        Self::new(ProbeLayer::Dropout(Tensor::matrix(4, 5, mask)?), 4, 5, 5, rng)
    }

    pub fn head(rng: &mut Rng) -> Result<Self> {
        Self::new(ProbeLayer::Identity, 1, 6, 6, rng)
    }

    fn layer_out(&self) -> Result<Tensor> {
        let x = &self.input.value;
        match &self.layer {
            ProbeLayer::Dense(d) => d.compute(x),
            ProbeLayer::Conv(c) => c.compute(x),
            ProbeLayer::MaxPool(_) => {
                let (y, _) = MaxPoolTime::compute(x)?;
                let n = y.len();
                y.reshape(vec![1, n])
            }
            ProbeLayer::Lstm(l) => l.compute_seq(x),
            ProbeLayer::Dropout(m) => apply_mask(x, m),
            ProbeLayer::Identity => Ok(x.clone()),
        }
    }

    fn mean_rows(y: &Tensor) -> Vec<f64> {
        let mut m = vec![0.0; y.cols()];
        for r in 0..y.rows() {
            for (a, b) in m.iter_mut().zip(y.row(r)) {
                *a += b;
            }
        }
        let t = y.rows() as f64;
        m.iter_mut().for_each(|v| *v /= t);
        m
    }
}

impl Parameterized for LayerProbe {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        f("input", &self.input);
        match &self.layer {
            ProbeLayer::Dense(d) => d.visit("layer", f),
            ProbeLayer::Conv(c) => c.visit("layer", f),
            ProbeLayer::Lstm(l) => l.visit("layer", f),
            _ => {}
        }
        self.head.visit("head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        f("input", &mut self.input);
        match &mut self.layer {
            ProbeLayer::Dense(d) => d.visit_mut("layer", f),
            ProbeLayer::Conv(c) => c.visit_mut("layer", f),
            ProbeLayer::Lstm(l) => l.visit_mut("layer", f),
            _ => {}
        }
        self.head.visit_mut("head", f);
    }
}

impl Classifier for LayerProbe {
    type Input = ();

    fn probabilities(&self, _: &()) -> Result<[f64; 2]> {
        let y = self.layer_out()?;
        self.head.compute(&Self::mean_rows(&y))
    }

    fn forward_train(&mut self, _: &(), _rng: &mut Rng) -> Result<[f64; 2]> {
        let x = self.input.value.clone();
        let y = match &mut self.layer {
            ProbeLayer::Dense(d) => d.forward(&x)?,
            ProbeLayer::Conv(c) => c.forward(&x)?,
            ProbeLayer::MaxPool(p) => {
                let y = p.forward(&x)?;
                let n = y.len();
                y.reshape(vec![1, n])?
            }
            ProbeLayer::Lstm(l) => l.forward_seq(&x)?,
            ProbeLayer::Dropout(m) => apply_mask(&x, m)?,
            ProbeLayer::Identity => x,
        };
        self.out_rows = Some(y.rows());
        self.head.forward(&Self::mean_rows(&y))
    }

    fn backward(&mut self, label: usize) -> Result<()> {
        let rows = self
            .out_rows
            .take()
            .ok_or(Error::State("probe backward called without a recorded forward"))?;
        let dm = self.head.backward(label)?;
        let d = dm.len();
        let scaled: Vec<f64> = dm.iter().map(|v| v / rows as f64).collect();
        let dy = Tensor::matrix(rows, d, scaled.repeat(rows))?;
        let dx = match &mut self.layer {
            ProbeLayer::Dense(l) => l.backward(&dy)?,
            ProbeLayer::Conv(c) => c.backward(&dy)?,
            ProbeLayer::MaxPool(p) => p.backward(&Tensor::vector(dy.into_data()))?,
            ProbeLayer::Lstm(l) => l.backward_seq(&dy)?,
            ProbeLayer::Dropout(m) => apply_mask(&dy, m)?,
            ProbeLayer::Identity => dy,
        };
        self.input.grad.add_assign(&dx)?;
        Ok(())
    }
}

/// One probe per layer type, in report order.
pub fn standard_probes(rng: &mut Rng) -> Result<Vec<(String, LayerProbe)>> {
    Ok(vec![
        ("affine".into(), LayerProbe::dense(Activation::Identity, rng)?),
        ("embedding (sigmoid)".into(), LayerProbe::dense(Activation::Sigmoid, rng)?),
        ("embedding (tanh)".into(), LayerProbe::dense(Activation::Tanh, rng)?),
        ("embedding (relu)".into(), LayerProbe::dense(Activation::Relu, rng)?),
        ("conv centred c=3 (tanh)".into(), LayerProbe::conv(3, Padding::Same, Activation::Tanh, rng)?),
        ("conv centred c=5 (relu)".into(), LayerProbe::conv(5, Padding::Same, Activation::Relu, rng)?),
        ("conv valid c=4 (relu)".into(), LayerProbe::conv(4, Padding::Valid, Activation::Relu, rng)?),
        ("maxpool_time".into(), LayerProbe::maxpool(rng)?),
        ("lstm".into(), LayerProbe::lstm(rng)?),
        ("dropout (fixed mask)".into(), LayerProbe::dropout(0.5, rng)?),
        ("softmax head".into(), LayerProbe::head(rng)?),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;

    #[test]
    fn every_layer_type_passes() {
        let mut rng = Rng::new(17);
        for (name, probe) in standard_probes(&mut rng).unwrap() {
            for label in 0..2 {
                let r = grad_check(&probe, &(), label, 1e-5).unwrap();
                assert!(r.max_relative_error < 1e-4, "{name}: {r:?}");
                assert!(r.checked > 0);
            }
        }
    }

    #[test]
    fn linear_network_is_tighter() {
        let mut rng = Rng::new(3);
        let probe = LayerProbe::dense(Activation::Identity, &mut rng).unwrap();
        let r = grad_check(&probe, &(), 1, 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn tampered_gradient_is_caught() {
        let mut rng = Rng::new(3);
        let probe = LayerProbe::conv(3, Padding::Same, Activation::Tanh, &mut rng).unwrap();
        let r = crate::nn::grad_check_with(&probe, &(), 0, 1e-5, |n, g| {
            if n == "layer.weight" {
                g.data_mut()[0] *= 1.5;
            }
        })
        .unwrap();
        assert!(r.max_relative_error > 1e-2);
        assert_eq!(r.worst_param, "layer.weight");
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut probe = LayerProbe::head(&mut Rng::new(0)).unwrap();
        assert!(matches!(probe.backward(0), Err(Error::State(_))));
    }
}
