//! `key = value` run configuration. Keys are grouped by component and named
//! after the hyperparameter table (`generator.batch_size`,
//! `rollout.rollout_number`, ...). Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::adversarial::{AdversarialConfig, PolicyOptions, RolloutConfig};
use crate::discriminator::{DiscTrainOptions, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, TrainOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,

    /// JSON-lines training corpus; a synthetic one is generated when absent.
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Relation schema file (one name per line, `NA` marks the null class).
    pub schema_path: Option<PathBuf>,
    /// Template grammar for synthetic corpora; the bundled one when absent.
    pub grammar_path: Option<PathBuf>,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub min_freq: usize,

    pub gen_batch_size: usize,
    pub gen_lr: f64,
    pub relation_embedding: usize,
    pub gen_word_embedding: usize,
    pub noise_size: usize,
    pub lstm_hidden: usize,
    pub position_hidden: usize,
    pub sequence_length: usize,
    pub ss_threshold: f64,
    pub clip: f64,
    pub gen_pretrain_epochs: usize,

    pub dis_batch_size: usize,
    pub dis_lr: f64,
    pub dis_word_embedding: usize,
    pub position_embedding: usize,
    pub filters: usize,
    pub filter_window: usize,
    pub keep_prob: f64,
    pub dis_pretrain_epochs: usize,
    /// Size of the generated corpus for discriminator pretraining; 0 means
    /// the number of real non-NA training sentences.
    pub fake_corpus_size: usize,
    pub word_embeddings: Option<PathBuf>,

    pub rollout_number: usize,
    pub temperature: f64,

    pub adversarial_epochs: usize,
    pub g_steps: usize,
    pub d_steps: usize,
    pub teacher_forcing_batches: usize,
    pub sample_batch: usize,

    pub retain_fraction: f64,
    pub augment_fraction: f64,
    pub experiment_seeds: Vec<u64>,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            train_path: None,
            test_path: None,
            schema_path: None,
            grammar_path: None,
            synthetic_train: 2000,
            synthetic_test: 500,
            min_freq: 1,
            gen_batch_size: 64,
            gen_lr: 1e-3,
            relation_embedding: 50,
            gen_word_embedding: 50,
            noise_size: 50,
            lstm_hidden: 120,
            position_hidden: 60,
            sequence_length: 100,
            ss_threshold: 0.5,
            clip: 5.0,
            gen_pretrain_epochs: 30,
            dis_batch_size: 64,
            dis_lr: 1e-4,
            dis_word_embedding: 50,
            position_embedding: 5,
            filters: 128,
            filter_window: 3,
            keep_prob: 0.5,
            dis_pretrain_epochs: 20,
            fake_corpus_size: 0,
            word_embeddings: None,
            rollout_number: 6,
            temperature: 1.0,
            adversarial_epochs: 20,
            // one policy-gradient step per epoch leaves the reward flat
            g_steps: 5,
            d_steps: 1,
            teacher_forcing_batches: 1,
            sample_batch: 64,
            retain_fraction: 0.1,
            augment_fraction: 0.2,
            experiment_seeds: vec![1, 2, 3, 4, 5],
            classifier_epochs: 20,
            classifier_lr: 1e-3,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            c.set(key.trim(), value.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "corpus.train" => self.train_path = path_or_none(value),
            "corpus.test" => self.test_path = path_or_none(value),
            "corpus.schema" => self.schema_path = path_or_none(value),
            "corpus.grammar" => self.grammar_path = path_or_none(value),
            "corpus.synthetic_train" => self.synthetic_train = parse(key, value)?,
            "corpus.synthetic_test" => self.synthetic_test = parse(key, value)?,
            "corpus.min_freq" => self.min_freq = parse(key, value)?,
            "generator.batch_size" => self.gen_batch_size = parse(key, value)?,
            "generator.adam_learning_rate" => self.gen_lr = parse(key, value)?,
            "generator.relation_embedding_size" => self.relation_embedding = parse(key, value)?,
            "generator.word_embedding_size" => self.gen_word_embedding = parse(key, value)?,
            "generator.noise_size" => self.noise_size = parse(key, value)?,
            "generator.lstm_hidden_dimension" => self.lstm_hidden = parse(key, value)?,
            "generator.position_hidden_dimension" => self.position_hidden = parse(key, value)?,
            "generator.sequence_length" => self.sequence_length = parse(key, value)?,
            "generator.scheduled_sampling_threshold" => self.ss_threshold = parse(key, value)?,
            "generator.gradient_clip_threshold" => self.clip = parse(key, value)?,
            "generator.pretrain_epochs" => self.gen_pretrain_epochs = parse(key, value)?,
            "discriminator.batch_size" => self.dis_batch_size = parse(key, value)?,
            "discriminator.adam_learning_rate" => self.dis_lr = parse(key, value)?,
            "discriminator.word_embedding_size" => self.dis_word_embedding = parse(key, value)?,
            "discriminator.position_embedding_size" => self.position_embedding = parse(key, value)?,
            "discriminator.filters" => self.filters = parse(key, value)?,
            "discriminator.filter_window_size" => self.filter_window = parse(key, value)?,
            "discriminator.dropout_keep_probability" => self.keep_prob = parse(key, value)?,
            "discriminator.pretrain_epochs" => self.dis_pretrain_epochs = parse(key, value)?,
            "discriminator.fake_corpus_size" => self.fake_corpus_size = parse(key, value)?,
            "discriminator.word_embeddings" => self.word_embeddings = path_or_none(value),
            "rollout.rollout_number" => self.rollout_number = parse(key, value)?,
            "rollout.temperature" => self.temperature = parse(key, value)?,
            "adversarial.epochs" => self.adversarial_epochs = parse(key, value)?,
            "adversarial.g_steps" => self.g_steps = parse(key, value)?,
            "adversarial.d_steps" => self.d_steps = parse(key, value)?,
            "adversarial.teacher_forcing_batches" => self.teacher_forcing_batches = parse(key, value)?,
            "adversarial.sample_batch_size" => self.sample_batch = parse(key, value)?,
            "experiment.retain_fraction" => self.retain_fraction = parse(key, value)?,
            "experiment.augment_fraction" => self.augment_fraction = parse(key, value)?,
            "experiment.seeds" => {
                self.experiment_seeds = value
                    .split(',')
                    .map(|s| parse(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "experiment.classifier_epochs" => self.classifier_epochs = parse(key, value)?,
            "experiment.classifier_learning_rate" => self.classifier_lr = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.rollout_number == 0 {
            return fail("rollout.rollout_number must be at least 1");
        }
        if !(self.temperature > 0.0) {
            return fail("rollout.temperature must be > 0");
        }
        if self.gen_batch_size == 0 || self.dis_batch_size < 2 {
            return fail("batch sizes must be positive (discriminator at least 2)");
        }
        if !(0.0..=1.0).contains(&self.ss_threshold) {
            return fail("generator.scheduled_sampling_threshold must lie in [0, 1]");
        }
        if !(self.retain_fraction > 0.0 && self.retain_fraction <= 1.0) {
            return fail("experiment.retain_fraction must lie in (0, 1]");
        }
        if !(self.augment_fraction >= 0.0) {
            return fail("experiment.augment_fraction must be >= 0");
        }
        if self.experiment_seeds.is_empty() {
            return fail("experiment.seeds is empty");
        }
        if self.train_path.is_some() != self.schema_path.is_some() {
            return fail("corpus.train and corpus.schema must be given together");
        }
        if self.test_path.is_some() && self.train_path.is_none() {
            return fail("corpus.test requires corpus.train");
        }
        Ok(())
    }

    /// Canonical rendering: every key, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.experiment_seeds.iter().map(u64::to_string).collect();
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("corpus.train", show_path(&self.train_path)),
            ("corpus.test", show_path(&self.test_path)),
            ("corpus.schema", show_path(&self.schema_path)),
            ("corpus.grammar", show_path(&self.grammar_path)),
            ("corpus.synthetic_train", self.synthetic_train.to_string()),
            ("corpus.synthetic_test", self.synthetic_test.to_string()),
            ("corpus.min_freq", self.min_freq.to_string()),
            ("generator.batch_size", self.gen_batch_size.to_string()),
            ("generator.adam_learning_rate", self.gen_lr.to_string()),
            ("generator.relation_embedding_size", self.relation_embedding.to_string()),
            ("generator.word_embedding_size", self.gen_word_embedding.to_string()),
            ("generator.noise_size", self.noise_size.to_string()),
            ("generator.lstm_hidden_dimension", self.lstm_hidden.to_string()),
            ("generator.position_hidden_dimension", self.position_hidden.to_string()),
            ("generator.sequence_length", self.sequence_length.to_string()),
            ("generator.scheduled_sampling_threshold", self.ss_threshold.to_string()),
            ("generator.gradient_clip_threshold", self.clip.to_string()),
            ("generator.pretrain_epochs", self.gen_pretrain_epochs.to_string()),
            ("discriminator.batch_size", self.dis_batch_size.to_string()),
            ("discriminator.adam_learning_rate", self.dis_lr.to_string()),
            ("discriminator.word_embedding_size", self.dis_word_embedding.to_string()),
            ("discriminator.position_embedding_size", self.position_embedding.to_string()),
            ("discriminator.filters", self.filters.to_string()),
            ("discriminator.filter_window_size", self.filter_window.to_string()),
            ("discriminator.dropout_keep_probability", self.keep_prob.to_string()),
            ("discriminator.pretrain_epochs", self.dis_pretrain_epochs.to_string()),
            ("discriminator.fake_corpus_size", self.fake_corpus_size.to_string()),
            ("discriminator.word_embeddings", show_path(&self.word_embeddings)),
            ("rollout.rollout_number", self.rollout_number.to_string()),
            ("rollout.temperature", self.temperature.to_string()),
            ("adversarial.epochs", self.adversarial_epochs.to_string()),
            ("adversarial.g_steps", self.g_steps.to_string()),
            ("adversarial.d_steps", self.d_steps.to_string()),
            ("adversarial.teacher_forcing_batches", self.teacher_forcing_batches.to_string()),
            ("adversarial.sample_batch_size", self.sample_batch.to_string()),
            ("experiment.retain_fraction", self.retain_fraction.to_string()),
            ("experiment.augment_fraction", self.augment_fraction.to_string()),
            ("experiment.seeds", seeds.join(",")),
            ("experiment.classifier_epochs", self.classifier_epochs.to_string()),
            ("experiment.classifier_learning_rate", self.classifier_lr.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn generator_config(&self, vocab_size: usize, relations: usize) -> GeneratorConfig {
        GeneratorConfig {
            vocab_size,
            relations,
            word_dim: self.gen_word_embedding,
            relation_dim: self.relation_embedding,
            noise_dim: self.noise_size,
            hidden: self.lstm_hidden,
            position_hidden: self.position_hidden,
            max_len: self.sequence_length,
            ss_threshold: self.ss_threshold,
        }
    }

    pub fn discriminator_config(&self, vocab_size: usize, relations: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            vocab_size,
            relations,
            word_dim: self.dis_word_embedding,
            position_dim: self.position_embedding,
            filters: self.filters,
            window: self.filter_window,
            keep_prob: self.keep_prob,
        }
    }

    pub fn mle_options(&self) -> TrainOptions {
        TrainOptions {
            batch_size: self.gen_batch_size,
            lr: self.gen_lr,
            clip: self.clip,
            ss_threshold: self.ss_threshold,
        }
    }

    pub fn disc_options(&self) -> DiscTrainOptions {
        DiscTrainOptions {
            batch_size: self.dis_batch_size,
            lr: self.dis_lr,
            dropout: true,
        }
    }

    /// Options for training the discriminator as a plain relation classifier.
    pub fn classifier_options(&self) -> DiscTrainOptions {
        DiscTrainOptions {
            batch_size: self.dis_batch_size,
            lr: self.classifier_lr,
            dropout: true,
        }
    }

    pub fn adversarial_config(&self) -> AdversarialConfig {
        AdversarialConfig {
            rollout: RolloutConfig {
                n: self.rollout_number,
                temperature: self.temperature,
            },
            g_steps: self.g_steps,
            d_steps: self.d_steps,
            teacher_forcing_batches: self.teacher_forcing_batches,
            sample_batch: self.sample_batch,
            policy: PolicyOptions {
                lr: self.gen_lr,
                clip: self.clip,
            },
            mle: self.mle_options(),
            disc: self.disc_options(),
        }
    }
}
