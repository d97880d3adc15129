use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversarial::{sample_fakes, Dataset, Pipeline};
use crate::config::Config;
use crate::corpus::{encode_all, filter_training, EncodedSentence, RelationalSentence};
use crate::discriminator::{train_classifier, Discriminator};
use crate::error::{Error, Result};
use crate::harness::{auc, held_out_eval};

/// AUC improvement reported for the full-scale corpus, as a fraction.
pub const REFERENCE_IMPROVEMENT: f64 = 0.0766;

const RETAIN_STREAM: u64 = 40;
const AUGMENT_STREAM: u64 = 41;
const CLASSIFIER_INIT_STREAM: u64 = 60;
const CLASSIFIER_TRAIN_STREAM: u64 = 61;

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Real training sentences kept.
    pub retained: usize,
    /// Generated sentences added for the augmented classifier.
    pub generated: usize,
    pub baseline_auc: f64,
    pub augmented_auc: f64,
    /// `augmented_auc - baseline_auc`.
    pub delta: f64,
    /// `delta / baseline_auc`, absent when the baseline is 0.
    pub relative_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_fingerprint: String,
    pub retain_fraction: f64,
    pub augment_fraction: f64,
    pub seeds: Vec<SeedResult>,
    pub mean_baseline_auc: f64,
    pub mean_augmented_auc: f64,
    /// Mean absolute AUC change.
    pub mean_delta: f64,
    /// Mean change relative to the mean baseline.
    pub mean_relative_delta: Option<f64>,
    /// Published improvement, kept for comparison only.
    pub reference_improvement: f64,
}

impl ExperimentReport {
    pub fn from_seeds(cfg: &Config, seeds: Vec<SeedResult>) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Empty("experiment seeds"));
        }
        let n = seeds.len() as f64;
        let mean_baseline_auc = seeds.iter().map(|s| s.baseline_auc).sum::<f64>() / n;
        let mean_augmented_auc = seeds.iter().map(|s| s.augmented_auc).sum::<f64>() / n;
        let mean_delta = seeds.iter().map(|s| s.delta).sum::<f64>() / n;
        Ok(ExperimentReport {
            config_fingerprint: cfg.fingerprint(),
            retain_fraction: cfg.retain_fraction,
            augment_fraction: cfg.augment_fraction,
            mean_baseline_auc,
            mean_augmented_auc,
            mean_delta,
            mean_relative_delta: (mean_baseline_auc > 0.0).then(|| mean_delta / mean_baseline_auc),
            reference_improvement: REFERENCE_IMPROVEMENT,
            seeds,
        })
    }

    /// One line per seed plus the means.
    pub fn summary(&self) -> String {
        let rel = |r: Option<f64>| r.map(|x| format!("{:+.2}%", 100.0 * x)).unwrap_or_else(|| "n/a".into());
        let mut s = String::new();
        for r in &self.seeds {
            s.push_str(&format!(
                "seed {}: baseline {:.4} augmented {:.4} delta {:+.4} ({})\n",
                r.seed,
                r.baseline_auc,
                r.augmented_auc,
                r.delta,
                rel(r.relative_delta)
            ));
        }
        s.push_str(&format!(
            "mean: baseline {:.4} augmented {:.4} delta {:+.4} ({}); reference {:+.2}%\n",
            self.mean_baseline_auc,
            self.mean_augmented_auc,
            self.mean_delta,
            rel(self.mean_relative_delta),
            100.0 * self.reference_improvement
        ));
        s
    }
}

/// A random `fraction` of `train` (at least one sentence), in corpus order.
pub fn retain_subset(train: &[RelationalSentence], fraction: f64, seed: u64) -> Vec<RelationalSentence> {
    let keep = ((fraction * train.len() as f64).round() as usize).clamp(1.min(train.len()), train.len());
    let mut idx: Vec<usize> = (0..train.len()).collect();
    idx.shuffle(&mut stream(seed, RETAIN_STREAM));
    idx.truncate(keep);
    idx.sort_unstable();
    idx.into_iter().map(|i| train[i].clone()).collect()
}

/// Trains a fresh relation classifier on `train` and returns its held-out
/// AUC on `test`. Initialisation and shuffling depend only on `seed`.
pub fn classifier_auc(
    cfg: &Config,
    data: &Dataset,
    train: &[EncodedSentence],
    test: &[EncodedSentence],
    seed: u64,
) -> Result<f64> {
    let dc = cfg.discriminator_config(data.vocab.len(), data.schema.len());
    let mut disc = Discriminator::new(dc, &mut stream(seed, CLASSIFIER_INIT_STREAM))?;
    train_classifier(
        &mut disc,
        train,
        cfg.classifier_epochs,
        &cfg.classifier_options(),
        &mut stream(seed, CLASSIFIER_TRAIN_STREAM),
    )?;
    auc(&held_out_eval(&disc, test, &data.schema)?)
}

/// Baseline and augmented AUC for one seed on an already reduced dataset.
pub fn run_seed(cfg: &Config, data: &Dataset, seed: u64) -> Result<SeedResult> {
    let mut seed_cfg = cfg.clone();
    seed_cfg.seed = seed;
    let max_len = cfg.sequence_length;
    let real = encode_all(&filter_training(&data.train, &data.schema, max_len, false), &data.vocab, max_len)?;
    let test = encode_all(&filter_training(&data.test, &data.schema, max_len, false), &data.vocab, max_len)?;
    if real.is_empty() {
        return Err(Error::Empty("retained training corpus"));
    }
    let baseline_auc = classifier_auc(&seed_cfg, data, &real, &test, seed)?;

    let pipeline = Pipeline::new(&seed_cfg, data)?;
    let count = (cfg.augment_fraction * pipeline.gen_corpus.len() as f64).round() as usize;
    let mut augmented = real.clone();
    if count > 0 {
        let out = pipeline.run(None)?;
        let fakes = sample_fakes(
            &out.generator,
            &pipeline.labels,
            count,
            cfg.temperature,
            &mut stream(seed, AUGMENT_STREAM),
        )?;
        augmented.extend(fakes.iter().filter_map(|s| s.encoded()));
    }
    let augmented_auc = classifier_auc(&seed_cfg, data, &augmented, &test, seed)?;
    let delta = augmented_auc - baseline_auc;
    log::info!("seed {seed}: baseline AUC {baseline_auc:.4}, augmented AUC {augmented_auc:.4}");
    Ok(SeedResult {
        seed,
        retained: data.train.len(),
        generated: count,
        baseline_auc,
        augmented_auc,
        delta,
        relative_delta: (baseline_auc > 0.0).then(|| delta / baseline_auc),
    })
}

/// For every experiment seed: keep `retain_fraction` of the real training
/// data, train a classifier on it (baseline), run the full pipeline on the
/// same data, add `augment_fraction` times the retained non-NA count of
/// generated sentences and train again (augmented).
pub fn compare_augmentation(cfg: &Config) -> Result<ExperimentReport> {
    cfg.validate()?;
    let full = Dataset::load(cfg)?;
    if full.test.is_empty() {
        return Err(Error::Empty("test corpus"));
    }
    let mut results = Vec::with_capacity(cfg.experiment_seeds.len());
    for &seed in &cfg.experiment_seeds {
        let train = retain_subset(&full.train, cfg.retain_fraction, seed);
        let data = Dataset::from_parts(full.schema.clone(), train, full.test.clone(), cfg.min_freq);
        results.push(run_seed(cfg, &data, seed)?);
    }
    ExperimentReport::from_seeds(cfg, results)
}
