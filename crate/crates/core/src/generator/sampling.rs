use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{EncodedSentence, RelationalSentence, Source, Vocab, EOS};
use crate::error::{Error, Result};
use crate::generator::model::UNSAMPLED;
use crate::generator::{GenState, Generator};

/// A sampled token sequence together with its conditioning and the decoded
/// entity positions.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedSample {
    pub relation: usize,
    pub noise: Vec<f64>,
    /// Emitted tokens after BOS; the last one is EOS.
    pub ids: Vec<usize>,
    pub p1_raw: f64,
    pub p2_raw: f64,
    /// `None` when fewer than two words were generated.
    pub positions: Option<(usize, usize)>,
}

impl GeneratedSample {
    pub fn words(&self) -> &[usize] {
        match self.ids.split_last() {
            Some((&EOS, rest)) => rest,
            _ => &self.ids,
        }
    }

    pub fn encoded(&self) -> Option<EncodedSentence> {
        let (e1p, e2p) = self.positions?;
        EncodedSentence::from_ids(self.words().to_vec(), e1p, e2p, self.relation).ok()
    }

    pub fn to_sentence(&self, vocab: &Vocab) -> Option<RelationalSentence> {
        let (e1p, e2p) = self.positions?;
        let tokens = self.words().iter().map(|&i| vocab.token(i).to_string()).collect();
        RelationalSentence::new(tokens, e1p, e2p, self.relation, Source::Generated).ok()
    }
}

/// Maps the two squashed position outputs onto token indices of a sentence
/// with `len` words, ordered and made distinct.
pub fn decode_positions(p1_raw: f64, p2_raw: f64, len: usize) -> Option<(usize, usize)> {
    if len < 2 {
        return None;
    }
    let last = (len - 1) as f64;
    let to_index = |p: f64| (p.clamp(0.0, 1.0) * last).round() as usize;
    let (a, b) = (to_index(p1_raw), to_index(p2_raw));
    let (mut e1, mut e2) = (a.min(b), a.max(b));
    if e1 == e2 {
        e2 = (e1 + 1).min(len - 1);
        if e1 == e2 {
            e1 -= 1;
        }
    }
    Some((e1, e2))
}

pub fn draw_noise<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Index drawn from `softmax(logits / temperature)`.
pub(crate) fn sample_token<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // divide rather than multiply so that a vanishing temperature never forms 0 * inf
    let weights: Vec<f64> = logits.iter().map(|&l| ((l - max) / temperature).exp()).collect();
    sample_categorical(&weights, rng)
}

/// Index drawn proportionally to the non-negative `weights`.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last_positive
}

impl Generator {
    /// Continues `state` until EOS; EOS is forced once `max_len` words exist.
    /// Returns the newly emitted tokens and the final position outputs.
    pub(crate) fn complete<R: Rng + ?Sized>(
        &self,
        mut state: GenState,
        temperature: f64,
        rng: &mut R,
    ) -> Result<(Vec<usize>, f64, f64)> {
        let start = state.emitted.len();
        loop {
            let prev = *state.emitted.last().expect("BOS present");
            let logits = self.step_logits(&mut state, prev)?;
            let words = state.emitted.len() - 1;
            let tok = if words >= self.cfg.max_len {
                EOS
            } else {
                let mut logits = logits;
                for i in UNSAMPLED {
                    logits[i] = f64::NEG_INFINITY;
                }
                sample_token(&logits, temperature, rng)
            };
            state.push(tok);
            if tok == EOS {
                let (p1, p2) = self.positions(&state.h);
                return Ok((state.emitted.split_off(start), p1, p2));
            }
        }
    }

    pub fn sample_ids<R: Rng + ?Sized>(
        &self,
        relation: usize,
        noise: &[f64],
        temperature: f64,
        rng: &mut R,
    ) -> Result<GeneratedSample> {
        if !(temperature > 0.0) {
            return Err(Error::Contract(format!("temperature must be > 0, got {temperature}")));
        }
        let state = self.init_state(relation, noise)?;
        let (ids, p1_raw, p2_raw) = self.complete(state, temperature, rng)?;
        let words = ids.len() - 1;
        Ok(GeneratedSample {
            relation,
            noise: noise.to_vec(),
            positions: decode_positions(p1_raw, p2_raw, words),
            ids,
            p1_raw,
            p2_raw,
        })
    }

    /// Samples until a sentence of at least two words comes out, trying at
    /// most twice.
    pub fn sample_valid<R: Rng + ?Sized>(
        &self,
        relation: usize,
        noise: &[f64],
        temperature: f64,
        rng: &mut R,
    ) -> Result<GeneratedSample> {
        for _ in 0..2 {
            let s = self.sample_ids(relation, noise, temperature, rng)?;
            if s.positions.is_some() {
                return Ok(s);
            }
        }
        Err(Error::Contract("generated sentence shorter than two words after resampling".into()))
    }

    pub fn sample_sentence<R: Rng + ?Sized>(
        &self,
        vocab: &Vocab,
        relation: usize,
        noise: &[f64],
        temperature: f64,
        rng: &mut R,
    ) -> Result<(RelationalSentence, GeneratedSample)> {
        let s = self.sample_valid(relation, noise, temperature, rng)?;
        let sentence = s.to_sentence(vocab).expect("positions decoded");
        Ok((sentence, s))
    }
}
