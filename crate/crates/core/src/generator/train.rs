//! Maximum-likelihood training with scheduled sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{EncodedSentence, EOS};
use crate::error::{Error, Result};
use crate::generator::{sample_categorical, Generator, SeqGrads};
use crate::numerics::kernels::cross_entropy_grad;
use crate::numerics::{adam_step, clip_gradients, GradMap};

/// Loss of one batch, split by branch. `total = token + pos1 + pos2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MleLoss {
    pub total: f64,
    /// Mean cross-entropy over every predicted token (EOS included).
    pub token: f64,
    /// Mean squared error of the first position head.
    pub pos1: f64,
    pub pos2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub ss_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 64,
            lr: 1e-3,
            clip: 5.0,
            ss_threshold: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_token_loss: f64,
}

fn position_target(pos: usize, len: usize) -> f64 {
    pos as f64 / (len - 1) as f64
}

/// Batch MLE loss and its gradient for every generator parameter.
///
/// Step 0 consumes BOS. Each later step consumes the gold previous word with
/// probability `ss_threshold`, otherwise a token sampled from the model's
/// own previous distribution. Targets are the words followed by EOS. The
/// position heads regress `e1p / (L - 1)` and `e2p / (L - 1)`.
pub fn mle_loss<R: Rng + ?Sized>(
    gen: &Generator,
    batch: &[EncodedSentence],
    ss_threshold: f64,
    rng: &mut R,
) -> Result<(MleLoss, GradMap)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    for s in batch {
        if s.len() < 2 {
            return Err(Error::Contract(format!("sentence of length {} (< 2)", s.len())));
        }
        if s.len() > gen.cfg.max_len {
            return Err(Error::Contract(format!(
                "sentence of length {} exceeds max_len {}",
                s.len(),
                gen.cfg.max_len
            )));
        }
    }
    let n_tokens: usize = batch.iter().map(|s| s.len() + 1).sum();
    let token_scale = 1.0 / n_tokens as f64;
    let pos_scale = 1.0 / batch.len() as f64;

    let mut grads = SeqGrads::zeros(gen);
    let (mut ce_sum, mut se1, mut se2) = (0.0, 0.0, 0.0);
    for s in batch {
        let len = s.len();
        let trace = gen.forward_trace(s.relation, &vec![0.0; gen.cfg.noise_dim], len + 1, |t, prev_probs| {
            if ss_threshold >= 1.0 || rng.random::<f64>() < ss_threshold {
                s.ids[t - 1]
            } else {
                sample_categorical(prev_probs, rng)
            }
        })?;
        let mut dlogits = Vec::with_capacity(len + 1);
        for (t, step) in trace.steps.iter().enumerate() {
            let target = if t < len { s.ids[t] } else { EOS };
            ce_sum -= step.probs[target].max(f64::MIN_POSITIVE).ln();
            dlogits.push(cross_entropy_grad(&step.probs, target, token_scale));
        }
        let targets = [position_target(s.e1p, len), position_target(s.e2p, len)];
        let diff = [trace.positions[0] - targets[0], trace.positions[1] - targets[1]];
        se1 += diff[0] * diff[0];
        se2 += diff[1] * diff[1];
        gen.backward_trace(&trace, &dlogits, [2.0 * diff[0] * pos_scale, 2.0 * diff[1] * pos_scale], &mut grads);
    }
    let token = ce_sum * token_scale;
    let pos1 = se1 * pos_scale;
    let pos2 = se2 * pos_scale;
    let loss = MleLoss {
        total: token + pos1 + pos2,
        token,
        pos1,
        pos2,
    };
    if !loss.total.is_finite() {
        return Err(Error::NonFinite("mle_loss".into()));
    }
    Ok((loss, grads.into_grad_map(gen)))
}

/// One MLE update: loss, global-norm clipping, Adam.
pub fn teacher_forcing_step<R: Rng + ?Sized>(
    gen: &mut Generator,
    batch: &[EncodedSentence],
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<MleLoss> {
    let (loss, mut grads) = mle_loss(gen, batch, opts.ss_threshold, rng)?;
    clip_gradients(&mut grads, opts.clip);
    adam_step(&mut gen.params, &grads, opts.lr)?;
    Ok(loss)
}

/// Mean per-token cross-entropy under pure teacher forcing, no update.
pub fn mean_token_loss(gen: &Generator, corpus: &[EncodedSentence]) -> Result<f64> {
    let (mut ce, mut n) = (0.0, 0usize);
    for s in corpus {
        let trace = gen.forward_trace(s.relation, &vec![0.0; gen.cfg.noise_dim], s.len() + 1, |t, _| s.ids[t - 1])?;
        for (t, step) in trace.steps.iter().enumerate() {
            let target = if t < s.len() { s.ids[t] } else { EOS };
            ce -= step.probs[target].max(f64::MIN_POSITIVE).ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty("corpus"));
    }
    Ok(ce / n as f64)
}

/// Shuffled mini-batch MLE over `corpus` for `epochs` passes.
pub fn pretrain_generator<R: Rng + ?Sized>(
    gen: &mut Generator,
    corpus: &[EncodedSentence],
    epochs: usize,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<Vec<EpochStats>> {
    if corpus.is_empty() {
        return Err(Error::Empty("generator training corpus"));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        order.shuffle(rng);
        let (mut total, mut token, mut batches) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let batch: Vec<EncodedSentence> = chunk.iter().map(|&i| corpus[i].clone()).collect();
            let loss = teacher_forcing_step(gen, &batch, opts, rng)?;
            total += loss.total;
            token += loss.token;
            batches += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total / batches as f64,
            mean_token_loss: token / batches as f64,
        };
        log::info!(
            "generator epoch {epoch}: loss {:.4} token {:.4}",
            stats.mean_loss,
            stats.mean_token_loss
        );
        history.push(stats);
    }
    Ok(history)
}
