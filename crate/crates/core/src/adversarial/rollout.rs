use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discriminator::{DiscOutput, Discriminator};
use crate::error::{Error, Result};
use crate::generator::{decode_positions, GenState, GeneratedSample, Generator};

/// `relation_dist[relation] * p_real`.
pub fn reward(out: &DiscOutput, relation: usize) -> f64 {
    out.relation_dist[relation] * out.p_real
}

/// Scores finished samples. The discriminator is the real implementation;
/// tests substitute stubs.
pub trait RewardModel {
    fn score(&self, sample: &GeneratedSample) -> Result<f64>;
}

impl RewardModel for Discriminator {
    /// Samples with fewer than two words have no entity pair and score 0.
    fn score(&self, sample: &GeneratedSample) -> Result<f64> {
        if sample.relation >= self.cfg.relations {
            return Err(Error::OutOfRange {
                what: "relation",
                index: sample.relation,
                len: self.cfg.relations,
            });
        }
        match sample.encoded() {
            Some(enc) => Ok(reward(&self.classify(&enc)?, sample.relation)),
            None => Ok(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutConfig {
    /// Completions per prefix.
    pub n: usize,
    pub temperature: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig { n: 6, temperature: 1.0 }
    }
}

fn finished_sample(gen: &Generator, base: &GeneratedSample, ids: Vec<usize>, p1: f64, p2: f64) -> GeneratedSample {
    let words = ids.len() - 1;
    debug_assert!(words <= gen.cfg.max_len);
    GeneratedSample {
        relation: base.relation,
        noise: base.noise.clone(),
        positions: decode_positions(p1, p2, words),
        ids,
        p1_raw: p1,
        p2_raw: p2,
    }
}

/// Expected reward of every prefix of `sample`.
///
/// Entry `t` (0-based) covers the prefix `ids[..=t]`: each of `cfg.n`
/// completions continues it with the current generator and is scored by
/// `model`; the entry is their mean. The last entry is the reward of the
/// finished sample itself. Completion `j` of prefix `t` draws from its own
/// ChaCha stream, keyed by a seed taken from `rng`.
pub fn rollout_rewards<M: RewardModel + ?Sized, R: Rng + ?Sized>(
    gen: &Generator,
    model: &M,
    sample: &GeneratedSample,
    cfg: &RolloutConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if cfg.n == 0 {
        return Err(Error::Config("rollout number must be at least 1".into()));
    }
    if !(cfg.temperature > 0.0) {
        return Err(Error::Config(format!("rollout temperature {} must be > 0", cfg.temperature)));
    }
    let tokens = sample.ids.len();
    if tokens == 0 {
        return Err(Error::Empty("sample"));
    }
    let base_seed: u64 = rng.random();
    let mut q = Vec::with_capacity(tokens);
    let mut state: GenState = gen.init_state(sample.relation, &sample.noise)?;
    for t in 0..tokens - 1 {
        // state after consuming ids[t-1] with ids[t] recorded as emitted
        if t > 0 {
            gen.step_logits(&mut state, sample.ids[t - 1])?;
        }
        state.push(sample.ids[t]);
        // running mean: exact when every completion scores the same
        let mut mean = 0.0;
        for j in 0..cfg.n {
            let mut r = ChaCha8Rng::seed_from_u64(base_seed);
            r.set_stream((t * cfg.n + j) as u64);
            let (tail, p1, p2) = gen.complete(state.clone(), cfg.temperature, &mut r)?;
            let mut ids = sample.ids[..=t].to_vec();
            ids.extend(tail);
            let v = model.score(&finished_sample(gen, sample, ids, p1, p2))?;
            mean += (v - mean) / (j + 1) as f64;
        }
        q.push(mean);
    }
    q.push(model.score(sample)?);
    Ok(q)
}
