use std::collections::BTreeMap;

use crate::error::Result;
use crate::math::Tensor;
use crate::nn::Parameterized;

/// Velocity-form momentum update:
///
/// ```text
/// v <- momentum * v - lr * g
/// p <- p + v
/// ```
pub fn sgd_momentum_step(
    param: &mut Tensor,
    grad: &Tensor,
    velocity: &mut Tensor,
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    param.same_shape("sgd param/grad", grad)?;
    param.same_shape("sgd param/velocity", velocity)?;
    for ((p, g), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(velocity.data_mut())
    {
        *v = momentum * *v - learning_rate * g;
        *p += *v;
    }
    Ok(())
}

/// Momentum SGD over every trainable parameter of a model. Velocities are
/// keyed by parameter name.
#[derive(Debug, Clone, Default)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Sgd {
            learning_rate,
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    /// Applies one update using the gradients currently held by `model`,
    /// scaled by `grad_scale` (e.g. `1 / batch_size`).
    pub fn step<M: Parameterized>(&mut self, model: &mut M, grad_scale: f64) -> Result<()> {
        let mut result = Ok(());
        let (lr, mu) = (self.learning_rate, self.momentum);
        let velocity = &mut self.velocity;
        model.visit_params_mut(&mut |name, p| {
            if !p.trainable || result.is_err() {
                return;
            }
            let v = velocity
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(p.value.shape()));
            let g = if grad_scale == 1.0 {
                p.grad.clone()
            } else {
                p.grad.scale(grad_scale)
            };
            result = sgd_momentum_step(&mut p.value, &g, v, lr, mu);
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_when_momentum_zero() {
        let mut p = Tensor::vector(vec![1.0, -2.0]);
        let g = Tensor::vector(vec![0.5, 0.25]);
        let mut v = Tensor::zeros(&[2]);
        sgd_momentum_step(&mut p, &g, &mut v, 0.1, 0.0).unwrap();
        assert_eq!(p.data(), &[1.0 - 0.05, -2.0 - 0.025]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = Tensor::vector(vec![3.0]);
        let mut v = Tensor::zeros(&[1]);
        for _ in 0..10 {
            sgd_momentum_step(&mut p, &Tensor::zeros(&[1]), &mut v, 0.5, 0.9).unwrap();
        }
        assert_eq!(p.data(), &[3.0]);
    }

    #[test]
    fn two_step_recurrence() {
        // v1 = -0.1, p1 = -0.1; v2 = 0.9 * -0.1 - 0.1 = -0.19, p2 = -0.29
        let mut p = Tensor::vector(vec![0.0]);
        let mut v = Tensor::vector(vec![0.0]);
        let g = Tensor::vector(vec![1.0]);
        sgd_momentum_step(&mut p, &g, &mut v, 0.1, 0.9).unwrap();
        assert!((v.data()[0] + 0.1).abs() < 1e-15);
        sgd_momentum_step(&mut p, &g, &mut v, 0.1, 0.9).unwrap();
        assert!((v.data()[0] + 0.19).abs() < 1e-15);
        assert!((p.data()[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::vector(vec![0.0, 1.0]);
        let mut v = Tensor::zeros(&[2]);
        assert!(sgd_momentum_step(&mut p, &Tensor::zeros(&[3]), &mut v, 0.1, 0.9).is_err());
    }
}
