//! Relation- and noise-conditioned LSTM sentence generator.
//!
//! The conditioning vector `[relation embedding ; noise]` sets the initial
//! hidden state. At every step the hidden state feeds three heads: the
//! next-token logits and two small MLPs that regress the normalised
//! positions of the two entities. Positions are read from the final step.

pub(crate) mod model;
mod sampling;
mod train;

pub use model::{token_distribution, GenOutput, GenState, Generator, GeneratorConfig};
pub use sampling::{decode_positions, draw_noise, GeneratedSample};
pub(crate) use sampling::sample_categorical;
pub use train::{mean_token_loss, mle_loss, pretrain_generator, teacher_forcing_step, EpochStats, MleLoss, TrainOptions};

pub(crate) use model::SeqGrads;
