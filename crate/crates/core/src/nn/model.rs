use super::dense::Dense;
use super::param::{Param, Parameterized};
use crate::error::{Error, Result};
use crate::math::{cross_entropy, softmax_slice, Activation, Rng, Tensor};

/// A binary classifier trained by backpropagation.
///
/// `forward_train` records activations; `backward` consumes them and
/// accumulates the gradient of the cross-entropy loss into every trainable
/// parameter. `probabilities` is the side-effect free inference path and is
/// safe to call concurrently on a shared model.
pub trait Classifier: Parameterized + Clone {
    type Input;

    /// `[p(negative), p(positive)]`.
    fn probabilities(&self, x: &Self::Input) -> Result<[f64; 2]>;

    fn forward_train(&mut self, x: &Self::Input, rng: &mut Rng) -> Result<[f64; 2]>;

    /// Backpropagates `-ln p[label]` through the last recorded forward.
    fn backward(&mut self, label: usize) -> Result<()>;

    /// False when the training forward is stochastic (active dropout).
    fn is_deterministic(&self) -> bool {
        true
    }

    /// Switches stochastic layers between training and inference.
    fn set_training(&mut self, _training: bool) {}

    fn positive_probability(&self, x: &Self::Input) -> Result<f64> {
        Ok(self.probabilities(x)?[1])
    }

    fn loss(&self, x: &Self::Input, label: usize) -> Result<f64> {
        let p = self.probabilities(x)?;
        cross_entropy(&Tensor::vector(p.to_vec()), label)
    }

    /// Forward + backward for one example; returns the loss.
    fn accumulate_gradients(&mut self, x: &Self::Input, label: usize, rng: &mut Rng) -> Result<f64> {
        let p = self.forward_train(x, rng)?;
        self.backward(label)?;
        cross_entropy(&Tensor::vector(p.to_vec()), label)
    }
}

/// Dense layer producing two logits, followed by softmax.
#[derive(Debug, Clone)]
pub struct SoftmaxHead {
    pub dense: Dense,
    last: Option<[f64; 2]>,
}

impl SoftmaxHead {
    pub fn new(d_in: usize, rng: &mut Rng) -> Result<Self> {
        Ok(SoftmaxHead {
            dense: Dense::new(d_in, 2, Activation::Identity, rng)?,
            last: None,
        })
    }

    pub fn zeros(d_in: usize) -> Result<Self> {
        Ok(SoftmaxHead {
            dense: Dense::from_params(Tensor::zeros(&[2, d_in]), Tensor::zeros(&[2]), Activation::Identity)?,
            last: None,
        })
    }

    pub fn d_in(&self) -> usize {
        self.dense.d_in()
    }

    fn to_pair(logits: &Tensor) -> [f64; 2] {
        let p = softmax_slice(logits.data());
        [p[0], p[1]]
    }

    pub fn compute(&self, features: &[f64]) -> Result<[f64; 2]> {
        let x = Tensor::matrix(1, features.len(), features.to_vec())?;
        Ok(Self::to_pair(&self.dense.compute(&x)?))
    }

    pub fn forward(&mut self, features: &[f64]) -> Result<[f64; 2]> {
        let x = Tensor::matrix(1, features.len(), features.to_vec())?;
        let p = Self::to_pair(&self.dense.forward(&x)?);
        self.last = Some(p);
        Ok(p)
    }

    /// Gradient of `-ln p[label]` w.r.t. the head's input features.
    pub fn backward(&mut self, label: usize) -> Result<Vec<f64>> {
        if label > 1 {
            return Err(Error::Index { index: label, len: 2 });
        }
        let p = self
            .last
            .take()
            .ok_or(Error::State("softmax head backward called without a recorded forward"))?;
        let mut dz = p.to_vec();
        dz[label] -= 1.0;
        let dx = self.dense.backward(&Tensor::matrix(1, 2, dz)?)?;
        Ok(dx.into_data())
    }

    pub fn clear_cache(&mut self) {
        self.last = None;
        self.dense.clear_cache();
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        self.dense.visit(prefix, f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.dense.visit_mut(prefix, f);
    }
}
