//! Tensor arithmetic and seeded Gaussian sampling.

mod rng;
mod tensor;

pub use rng::RandomStream;
pub use tensor::Tensor;
