//! Layers with analytic forward/backward passes, the binary classifier
//! abstraction, and finite-difference gradient verification.

mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod lstm;
mod model;
mod param;
mod pool;
mod probe;

pub use conv::{ConvLayer, Padding};
pub use dense::{Dense, EmbeddingLayer};
pub use dropout::{apply_mask, dropout_forward, Dropout, DropoutMode, DropoutSpec};
pub use gradcheck::{grad_check, grad_check_with, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use lstm::{lstm_step, ForcedGates, LstmCell, StepTrace};
pub use model::{Classifier, SoftmaxHead};
pub use param::{Param, Parameterized};
pub use pool::MaxPoolTime;
pub use probe::{standard_probes, LayerProbe, ProbeLayer};

use crate::error::{Error, Result};
use crate::math::Tensor;

fn stack(xs: &[Tensor]) -> Result<Tensor> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("empty sequence"));
    }
    let rows: Vec<Vec<f64>> = xs.iter().map(|t| t.data().to_vec()).collect();
    Tensor::from_rows(&rows)
}

fn unstack(m: &Tensor) -> Vec<Tensor> {
    (0..m.rows()).map(|r| Tensor::vector(m.row(r).to_vec())).collect()
}

/// Applies the embedding layer at every position.
pub fn embed_forward(layer: &EmbeddingLayer, xs: &[Tensor]) -> Result<Vec<Tensor>> {
    Ok(unstack(&layer.compute(&stack(xs)?)?))
}

/// Windowed convolution over a sequence of vectors.
pub fn conv_forward(layer: &ConvLayer, xs: &[Tensor]) -> Result<Vec<Tensor>> {
    Ok(unstack(&layer.compute(&stack(xs)?)?))
}

/// Per-feature maximum over the sequence.
pub fn maxpool_time(xs: &[Tensor]) -> Result<Tensor> {
    Ok(MaxPoolTime::compute(&stack(xs)?)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Activation, Rng};

    #[test]
    fn sequence_wrappers() {
        assert!(matches!(maxpool_time(&[]), Err(Error::EmptyInput(_))));
        let layer = Dense::from_params(Tensor::zeros(&[2, 3]), Tensor::zeros(&[2]), Activation::Tanh).unwrap();
        assert!(matches!(embed_forward(&layer, &[]), Err(Error::EmptyInput(_))));
        let out = embed_forward(&layer, &[Tensor::vector(vec![1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].data(), &[0.0, 0.0]);

        let conv = ConvLayer::new(1, 2, 3, Padding::Same, Activation::Relu, &mut Rng::new(1)).unwrap();
        let xs: Vec<Tensor> = (0..4).map(|i| Tensor::vector(vec![i as f64])).collect();
        assert_eq!(conv_forward(&conv, &xs).unwrap().len(), 4);
        let pooled = maxpool_time(&[Tensor::vector(vec![1.0, 5.0]), Tensor::vector(vec![3.0, 2.0])]).unwrap();
        assert_eq!(pooled.data(), &[3.0, 5.0]);
    }
}
