use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::EncodedSentence;
use crate::discriminator::{loss_relation, loss_total, DiscLosses, Discriminator};
use crate::error::{Error, Result};
use crate::numerics::adam_step;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscTrainOptions {
    /// Sentences per batch; adversarial batches split it evenly real/fake.
    pub batch_size: usize,
    pub lr: f64,
    /// Apply dropout while training.
    pub dropout: bool,
}

impl Default for DiscTrainOptions {
    fn default() -> Self {
        DiscTrainOptions {
            batch_size: 64,
            lr: 1e-4,
            dropout: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscEpochStats {
    pub epoch: usize,
    /// Batch means of the losses.
    pub losses: DiscLosses,
}

/// One Adam step on `loss_total` for a real and a fake batch.
pub fn discriminator_step<R: Rng>(
    disc: &mut Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    opts: &DiscTrainOptions,
    rng: &mut R,
) -> Result<DiscLosses> {
    let dropout: Option<&mut dyn rand::RngCore> = if opts.dropout { Some(rng) } else { None };
    let (losses, grads) = loss_total(disc, real, fake, dropout)?;
    adam_step(&mut disc.params, &grads, opts.lr)?;
    Ok(losses)
}

/// Minimizes `loss_total` with batches of half real, half fake sentences.
/// An epoch is one pass over the real corpus; fakes are drawn from a
/// reshuffled cycle over the fake corpus.
pub fn pretrain_discriminator<R: Rng>(
    disc: &mut Discriminator,
    real: &[EncodedSentence],
    fake: &[EncodedSentence],
    epochs: usize,
    opts: &DiscTrainOptions,
    rng: &mut R,
) -> Result<Vec<DiscEpochStats>> {
    if real.is_empty() {
        return Err(Error::Empty("real corpus"));
    }
    if fake.is_empty() {
        return Err(Error::Empty("fake corpus"));
    }
    let half = (opts.batch_size / 2).max(1);
    let mut real_order: Vec<usize> = (0..real.len()).collect();
    let mut fake_order: Vec<usize> = (0..fake.len()).collect();
    fake_order.shuffle(rng);
    let mut fake_cursor = 0;
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        real_order.shuffle(rng);
        let mut sum = DiscLosses::default();
        let mut batches = 0usize;
        for chunk in real_order.chunks(half) {
            let real_batch: Vec<EncodedSentence> = chunk.iter().map(|&i| real[i].clone()).collect();
            let mut fake_batch = Vec::with_capacity(chunk.len());
            while fake_batch.len() < chunk.len() {
                if fake_cursor == fake_order.len() {
                    fake_order.shuffle(rng);
                    fake_cursor = 0;
                }
                fake_batch.push(fake[fake_order[fake_cursor]].clone());
                fake_cursor += 1;
            }
            let l = discriminator_step(disc, &real_batch, &fake_batch, opts, rng)?;
            sum.source += l.source;
            sum.relation += l.relation;
            sum.total += l.total;
            batches += 1;
        }
        let n = batches as f64;
        let losses = DiscLosses {
            source: sum.source / n,
            relation: sum.relation / n,
            total: sum.total / n,
        };
        log::info!(
            "discriminator epoch {epoch}: L_S {:.4} L_R {:.4}",
            losses.source,
            losses.relation
        );
        history.push(DiscEpochStats { epoch, losses });
    }
    Ok(history)
}

/// Trains only the relation head path (`loss_relation` on labelled data),
/// as a plain relation classifier.
pub fn train_classifier<R: Rng>(
    disc: &mut Discriminator,
    corpus: &[EncodedSentence],
    epochs: usize,
    opts: &DiscTrainOptions,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::Empty("classifier corpus"));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        order.shuffle(rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let batch: Vec<EncodedSentence> = chunk.iter().map(|&i| corpus[i].clone()).collect();
            let dropout: Option<&mut dyn rand::RngCore> = if opts.dropout { Some(&mut *rng) } else { None };
            let (l, grads) = loss_relation(disc, &batch, &[], dropout)?;
            adam_step(&mut disc.params, &grads, opts.lr)?;
            sum += l;
            batches += 1;
        }
        log::debug!("classifier epoch {epoch}: L_R {:.4}", sum / batches as f64);
        history.push(sum / batches as f64);
    }
    Ok(history)
}

/// Fraction of sentences whose argmax relation equals the gold label.
pub fn relation_accuracy(disc: &Discriminator, corpus: &[EncodedSentence]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Empty("evaluation corpus"));
    }
    let mut correct = 0usize;
    for s in corpus {
        let out = disc.classify(s)?;
        let all: Vec<usize> = (0..disc.cfg.relations).collect();
        if out.best_among(&all).map(|(r, _)| r) == Some(s.relation) {
            correct += 1;
        }
    }
    Ok(correct as f64 / corpus.len() as f64)
}
