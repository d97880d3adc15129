//! Dense tensor kernels with analytic gradients, Adam, clipping and a
//! finite-difference gradient checker.

pub mod checkpoint;
pub mod conv;
mod gradcheck;
pub mod kernels;
pub mod lstm;
mod optim;
mod tensor;

pub use conv::{conv1d, conv1d_backward, piecewise_max_pool, piecewise_max_pool_backward, Pooled};
pub use gradcheck::{check_gradients, check_gradients_sampled, DEFAULT_SAMPLE};
pub use kernels::{affine, affine_backward, sigmoid, softmax, softmax_cross_entropy};
pub use lstm::{lstm_step, lstm_step_backward, LstmCache, LstmWeights};
pub use optim::{adam_step, adam_step_with, clip_gradients, AdamConfig, GradMap, ParamStore};
pub use tensor::Tensor;

/// Bound of the uniform initialisation used for every model parameter.
pub const INIT_BOUND: f64 = 0.1;
