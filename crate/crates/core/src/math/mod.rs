//! Tensor arithmetic, nonlinearities, softmax/cross-entropy and the seeded RNG.

mod rng;
mod tensor;

pub use rng::{fnv1a, Rng};
pub use tensor::{
    activation, affine, argmax, cross_entropy, sigmoid, softmax, Activation, Tensor, CE_FLOOR,
};
pub(crate) use tensor::{affine_into, axpy, dot, softmax_slice};
