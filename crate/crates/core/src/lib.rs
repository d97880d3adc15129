//! Relation extraction with an auxiliary-classifier GAN.
//!
//! An LSTM generator, conditioned on a relation label and a noise vector,
//! emits relational sentences together with the positions of their two
//! entities. A piecewise-pooled CNN discriminator scores each sentence for
//! authenticity and relation. The generator is trained with REINFORCE on
//! Monte Carlo rollout rewards, interleaved with maximum-likelihood updates,
//! and the harness measures whether generated sentences help a relation
//! classifier on held-out data.

pub mod adversarial;
pub mod config;
pub mod corpus;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{GradMap, ParamStore, Tensor};
