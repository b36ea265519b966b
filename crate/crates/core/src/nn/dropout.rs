use crate::error::{Error, Result};
use crate::math::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: during training each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`, so
/// inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: DropoutMode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(DropoutSpec { rate, mode })
    }

    /// True when the layer behaves as a fixed function of its input.
    pub fn is_deterministic(&self) -> bool {
        self.mode == DropoutMode::Infer || self.rate == 0.0
    }
}

/// Returns `(y, mask)` where `y = x ⊙ mask` and `mask` already carries the
/// `1 / (1 - rate)` scale.
pub fn dropout_forward(spec: &DropoutSpec, x: &Tensor, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&spec.rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {}", spec.rate)));
    }
    if spec.is_deterministic() {
        return Ok((x.clone(), Tensor::filled(x.shape(), 1.0)));
    }
    let keep = 1.0 / (1.0 - spec.rate);
    let mut mask = Tensor::zeros(x.shape());
    for m in mask.data_mut() {
        *m = if rng.uniform() < spec.rate { 0.0 } else { keep };
    }
    let y = apply_mask(x, &mask)?;
    Ok((y, mask))
}

pub fn apply_mask(x: &Tensor, mask: &Tensor) -> Result<Tensor> {
    x.same_shape("dropout mask", mask)?;
    Ok(Tensor::new(
        x.shape().to_vec(),
        x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect(),
    )?)
}

/// Stateful wrapper used inside networks.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub spec: DropoutSpec,
    cache: Vec<Tensor>,
}

impl Dropout {
    pub fn new(spec: DropoutSpec) -> Self {
        Dropout {
            spec,
            cache: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, rng: &mut Rng) -> Result<Tensor> {
        let (y, mask) = dropout_forward(&self.spec, x, rng)?;
        self.cache.push(mask);
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let mask = self
            .cache
            .pop()
            .ok_or(Error::State("dropout backward called without a recorded forward"))?;
        apply_mask(dy, &mask)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}
