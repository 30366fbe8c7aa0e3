//! Minimal reverse-mode automatic differentiation over dense f64 matrices,
//! plus the small neural-network building blocks used by the learning stack:
//! multi-layer perceptrons, masked multi-head attention, Gumbel-softmax
//! sampling with a straight-through estimator, Adam, and a binary parameter
//! checkpoint container.

pub mod checkpoint;
pub mod error;
pub mod gumbel;
pub mod nn;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::Error;
pub use gumbel::{gumbel_noise, gumbel_softmax, GumbelSample};
pub use nn::{MultiHeadAttention, Perceptron};
pub use params::{Gradients, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, Error>;
