use rand::seq::IndexedRandom;
use rand::Rng;

use crate::adversarial::{policy_gradient_step, rollout_rewards, PolicyOptions, RolloutConfig};
use crate::corpus::EncodedSentence;
use crate::discriminator::{discriminator_step, DiscTrainOptions, Discriminator};
use crate::error::{Error, Result};
use crate::generator::{draw_noise, teacher_forcing_step, GeneratedSample, Generator, TrainOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversarialConfig {
    pub rollout: RolloutConfig,
    /// Generator updates per epoch.
    pub g_steps: usize,
    /// Discriminator updates per epoch.
    pub d_steps: usize,
    /// MLE batches after each policy-gradient step.
    pub teacher_forcing_batches: usize,
    /// Sentences sampled per policy-gradient step.
    pub sample_batch: usize,
    pub policy: PolicyOptions,
    pub mle: TrainOptions,
    pub disc: DiscTrainOptions,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        AdversarialConfig {
            rollout: RolloutConfig::default(),
            g_steps: 5,
            d_steps: 1,
            teacher_forcing_batches: 1,
            sample_batch: 64,
            policy: PolicyOptions::default(),
            mle: TrainOptions::default(),
            disc: DiscTrainOptions::default(),
        }
    }
}

/// Per-epoch summary. Fields are `None` when the corresponding step count
/// is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpochMetrics {
    /// Mean reward of the finished sampled sentences.
    pub mean_reward: Option<f64>,
    pub l_s: Option<f64>,
    pub l_r: Option<f64>,
    /// Mean MLE loss of the teacher-forcing batches.
    pub gen_loss: Option<f64>,
}

/// Samples `count` sentences with at least two words, labels drawn
/// uniformly from `labels` and standard-normal noise.
pub fn sample_fakes<R: Rng>(
    gen: &Generator,
    labels: &[usize],
    count: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Vec<GeneratedSample>> {
    if labels.is_empty() {
        return Err(Error::Empty("generation labels"));
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 20 * count + 100 {
            return Err(Error::Contract(format!(
                "only {} of {count} sampled sentences had two or more words",
                out.len()
            )));
        }
        let r = *labels.choose(rng).expect("nonempty");
        let noise = draw_noise(gen.cfg.noise_dim, rng);
        let s = gen.sample_ids(r, &noise, temperature, rng)?;
        if s.positions.is_some() {
            out.push(s);
        }
    }
    Ok(out)
}

fn random_batch<R: Rng>(corpus: &[EncodedSentence], size: usize, rng: &mut R) -> Vec<EncodedSentence> {
    (0..size).map(|_| corpus.choose(rng).expect("nonempty").clone()).collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// One epoch of joint training.
///
/// `g_steps` times: sample a batch conditioned on `labels`, estimate rollout
/// rewards against the discriminator, take a policy-gradient step, then
/// `teacher_forcing_batches` MLE steps on `gen_corpus`. Then `d_steps`
/// discriminator steps, each on fresh fakes and real sentences from
/// `disc_corpus`.
pub fn adversarial_epoch<R: Rng>(
    gen: &mut Generator,
    disc: &mut Discriminator,
    gen_corpus: &[EncodedSentence],
    disc_corpus: &[EncodedSentence],
    labels: &[usize],
    cfg: &AdversarialConfig,
    rng: &mut R,
) -> Result<EpochMetrics> {
    if cfg.teacher_forcing_batches > 0 && gen_corpus.is_empty() {
        return Err(Error::Empty("generator corpus"));
    }
    if cfg.d_steps > 0 && disc_corpus.is_empty() {
        return Err(Error::Empty("discriminator corpus"));
    }
    let mut rewards_seen = Vec::new();
    let mut mle_losses = Vec::new();
    for _ in 0..cfg.g_steps {
        if labels.is_empty() {
            return Err(Error::Empty("generation labels"));
        }
        let mut samples = Vec::with_capacity(cfg.sample_batch);
        let mut rewards = Vec::with_capacity(cfg.sample_batch);
        for _ in 0..cfg.sample_batch {
            let r = *labels.choose(rng).expect("nonempty");
            let noise = draw_noise(gen.cfg.noise_dim, rng);
            let s = gen.sample_ids(r, &noise, cfg.rollout.temperature, rng)?;
            let q = rollout_rewards(gen, &*disc, &s, &cfg.rollout, rng)?;
            rewards_seen.push(*q.last().expect("nonempty reward row"));
            samples.push(s);
            rewards.push(q);
        }
        if !samples.is_empty() {
            policy_gradient_step(gen, &samples, &rewards, &cfg.policy)?;
        }
        for _ in 0..cfg.teacher_forcing_batches {
            let batch = random_batch(gen_corpus, cfg.mle.batch_size, rng);
            mle_losses.push(teacher_forcing_step(gen, &batch, &cfg.mle, rng)?.total);
        }
    }
    let (mut ls, mut lr) = (Vec::new(), Vec::new());
    for _ in 0..cfg.d_steps {
        let half = (cfg.disc.batch_size / 2).max(1);
        let fakes: Vec<EncodedSentence> = sample_fakes(gen, labels, half, cfg.rollout.temperature, rng)?
            .iter()
            .map(|s| s.encoded().expect("valid sample"))
            .collect();
        let real = random_batch(disc_corpus, half, rng);
        let l = discriminator_step(disc, &real, &fakes, &cfg.disc, rng)?;
        ls.push(l.source);
        lr.push(l.relation);
    }
    Ok(EpochMetrics {
        mean_reward: mean(&rewards_seen),
        l_s: mean(&ls),
        l_r: mean(&lr),
        gen_loss: mean(&mle_losses),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::model::tests::tiny_cfg as tiny_disc;
    use crate::generator::model::tests::tiny_cfg as tiny_gen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus() -> Vec<EncodedSentence> {
        (0..8)
            .map(|i| EncodedSentence::from_ids(vec![4 + i % 3, 7, 8, 5], 0, 3, 1 + i % 2).unwrap())
            .collect()
    }

    fn models(seed: u64) -> (Generator, Discriminator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gc = tiny_gen(9, 3);
        gc.max_len = 6;
        (
            Generator::new(gc, &mut rng).unwrap(),
            Discriminator::new(tiny_disc(9, 3), &mut rng).unwrap(),
        )
    }

    fn small_cfg() -> AdversarialConfig {
        let mut cfg = AdversarialConfig {
            sample_batch: 4,
            ..AdversarialConfig::default()
        };
        cfg.rollout.n = 2;
        cfg.mle.batch_size = 4;
        cfg.disc.batch_size = 4;
        cfg
    }

    #[test]
    fn zero_steps_change_nothing() {
        let (mut g, mut d) = models(0);
        let (g0, d0) = (g.params.clone(), d.params.clone());
        let cfg = AdversarialConfig {
            g_steps: 0,
            d_steps: 0,
            ..small_cfg()
        };
        let c = corpus();
        let m = adversarial_epoch(&mut g, &mut d, &c, &c, &[1, 2], &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(m, EpochMetrics::default());
        assert_eq!(g.params, g0);
        assert_eq!(d.params, d0);
    }

    #[test]
    fn deterministic_for_seed() {
        let c = corpus();
        let run = || {
            let (mut g, mut d) = models(3);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let ms: Vec<_> = (0..2)
                .map(|_| adversarial_epoch(&mut g, &mut d, &c, &c, &[1, 2], &small_cfg(), &mut rng).unwrap())
                .collect();
            (ms, g.params, d.params)
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        let m = a.0[0];
        assert!(m.mean_reward.unwrap() >= 0.0 && m.mean_reward.unwrap() <= 1.0);
        assert!(m.l_s.is_some() && m.l_r.is_some() && m.gen_loss.is_some());
    }

    #[test]
    fn no_teacher_forcing_is_pure_policy_gradient() {
        let c = corpus();
        let cfg = AdversarialConfig {
            teacher_forcing_batches: 0,
            d_steps: 0,
            ..small_cfg()
        };
        let (mut g, mut d) = models(5);
        let d0 = d.params.clone();
        let m = adversarial_epoch(&mut g, &mut d, &[], &c, &[1, 2], &cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(m.gen_loss.is_none());
        assert!(m.mean_reward.is_some());
        assert_eq!(d.params, d0);
    }

    #[test]
    fn fakes_are_valid_and_labelled() {
        let (g, _) = models(1);
        let fakes = sample_fakes(&g, &[1, 2], 50, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(fakes.len(), 50);
        assert!(fakes.iter().all(|s| s.encoded().is_some() && (s.relation == 1 || s.relation == 2)));
        assert!(sample_fakes(&g, &[], 1, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
