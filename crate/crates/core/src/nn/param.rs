use crate::math::{Rng, Tensor};

/// A trainable tensor together with its accumulated gradient.
///
/// Frozen parameters (`trainable == false`) are never touched by the
/// optimizer and their gradient is not accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            value,
            grad,
            trainable: true,
        }
    }

    pub fn frozen(value: Tensor) -> Self {
        Param {
            trainable: false,
            ..Param::new(value)
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Param::new(Tensor::zeros(shape))
    }

    /// Glorot-uniform matrix in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        Self::glorot_fan(rows, cols, cols, rows, rng)
    }

    pub fn glorot_fan(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Param::new(Tensor::matrix(rows, cols, data).expect("non-zero dims"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns named parameters.
pub trait Parameterized {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param));

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.len());
        n
    }

    fn trainable_param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| {
            if p.trainable {
                n += p.value.len()
            }
        });
        n
    }

    /// Names in visiting order.
    fn param_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        self.visit_params(&mut |n, _| v.push(n.to_string()));
        v
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
