//! PCNN discriminator: word and relative-position embeddings, a same-padded
//! convolution, tanh, three-segment max pooling around the entities, then a
//! real/fake head and a relation head.

mod io;
mod loss;
pub(crate) mod model;
mod train;

pub use io::{load_word_embeddings, read_classifications, save_classifications, write_classifications};
pub use loss::{loss_relation, loss_source, loss_total, DiscLosses};
pub use model::{DiscOutput, Discriminator, DiscriminatorConfig};
pub use train::{
    discriminator_step, pretrain_discriminator, relation_accuracy, train_classifier, DiscEpochStats,
    DiscTrainOptions,
};
