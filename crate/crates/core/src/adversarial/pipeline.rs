use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversarial::{adversarial_epoch, sample_fakes, EpochMetrics};
use crate::config::Config;
use crate::corpus::{
    encode_all, filter_training, save_jsonl, synth_corpus, EncodedSentence, Grammar, RelationSchema,
    RelationalSentence, Vocab,
};
use crate::discriminator::{load_word_embeddings, pretrain_discriminator, Discriminator};
use crate::error::{Error, Result};
use crate::generator::{pretrain_generator, GeneratedSample, Generator};
use crate::numerics::ParamStore;

/// Phase names, in execution order.
pub const PHASES: [&str; 4] = ["pretrain-generator", "generate", "pretrain-discriminator", "adversarial"];

pub const CONFIG_FILE: &str = "config.txt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const SCHEMA_FILE: &str = "schema.txt";
pub const GEN_PRETRAINED_FILE: &str = "generator.pretrained.ckpt";
pub const DIS_PRETRAINED_FILE: &str = "discriminator.pretrained.ckpt";
pub const GEN_FILE: &str = "generator.ckpt";
pub const DIS_FILE: &str = "discriminator.ckpt";
pub const GENERATED_FILE: &str = "generated.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SAMPLES_FILE: &str = "samples.txt";

const METRICS_HEADER: &str = "epoch,phase,mean_reward,L_S,L_R,gen_loss";

const TEST_SEED_SALT: u64 = 0x7e57_5a17;

/// Schema, vocabulary and real sentences for a run.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: RelationSchema,
    pub vocab: Vocab,
    pub train: Vec<RelationalSentence>,
    pub test: Vec<RelationalSentence>,
}

impl Dataset {
    /// Loads the configured corpus files, or samples a synthetic train/test
    /// split from the grammar.
    pub fn load(cfg: &Config) -> Result<Self> {
        let (schema, train, test) = match (&cfg.train_path, &cfg.schema_path) {
            (Some(train), Some(schema)) => {
                let schema = RelationSchema::from_text(&fs::read_to_string(schema)?)?;
                let train_c = crate::corpus::load_jsonl(train, &schema)?;
                let test_c = match &cfg.test_path {
                    Some(p) => crate::corpus::load_jsonl(p, &schema)?,
                    None => Vec::new(),
                };
                (schema, train_c, test_c)
            }
            _ => {
                let grammar = match &cfg.grammar_path {
                    Some(p) => Grammar::load(p)?,
                    None => Grammar::bundled(),
                };
                let schema = grammar.schema()?;
                let train = synth_corpus(&grammar, &schema, cfg.synthetic_train, cfg.seed)?;
                let test = synth_corpus(&grammar, &schema, cfg.synthetic_test, cfg.seed ^ TEST_SEED_SALT)?;
                (schema, train, test)
            }
        };
        Ok(Self::from_parts(schema, train, test, cfg.min_freq))
    }

    /// Builds the vocabulary from `train`.
    pub fn from_parts(
        schema: RelationSchema,
        train: Vec<RelationalSentence>,
        test: Vec<RelationalSentence>,
        min_freq: usize,
    ) -> Self {
        let vocab = Vocab::build(&train, min_freq);
        Dataset {
            schema,
            vocab,
            train,
            test,
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub phase: &'static str,
    pub metrics: EpochMetrics,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_default();
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.epoch,
            r.phase,
            cell(m.mean_reward),
            cell(m.l_s),
            cell(m.l_r),
            cell(m.gen_loss)
        );
    }
    s
}

/// Replaces the rows of `phase` and every later phase in an existing metrics
/// file with `rows`. Rows of earlier phases are kept byte for byte, so
/// running the phases one at a time reproduces a full run's file.
pub fn splice_metrics(existing: Option<&str>, phase: &str, rows: &[MetricsRow]) -> Result<String> {
    let rank = |name: &str| PHASES.iter().position(|p| *p == name);
    let cut = rank(phase).ok_or_else(|| Error::Contract(format!("unknown phase `{phase}`")))?;
    let mut out = format!("{METRICS_HEADER}\n");
    if let Some(text) = existing {
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(Error::Parse {
                line: 1,
                msg: "metrics file lacks the expected header".into(),
            });
        }
        for (i, line) in lines.enumerate() {
            let name = line.split(',').nth(1).unwrap_or_default();
            let r = rank(name).ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("unknown phase `{name}`"),
            })?;
            if r < cut {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    out.push_str(&metrics_csv(rows)[METRICS_HEADER.len() + 1..]);
    Ok(out)
}

/// Everything a finished pipeline run produced.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub pretrained_generator: Generator,
    pub pretrained_discriminator: Discriminator,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub generated: Vec<GeneratedSample>,
    pub metrics: Vec<MetricsRow>,
    /// Phases in the order they ran.
    pub phases: Vec<&'static str>,
}

/// The four training phases over one dataset. Each phase draws from its own
/// ChaCha stream of the run seed, so phases can also be run one at a time.
pub struct Pipeline<'a> {
    pub cfg: &'a Config,
    pub data: &'a Dataset,
    /// Real non-NA training sentences within the length limit.
    pub gen_corpus: Vec<EncodedSentence>,
    /// All real training sentences within the length limit.
    pub disc_corpus: Vec<EncodedSentence>,
    /// Labels the generator is conditioned on.
    pub labels: Vec<usize>,
}

fn phase_error(phase: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::Phase {
        phase,
        source: Box::new(e),
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a Config, data: &'a Dataset) -> Result<Self> {
        cfg.validate()?;
        let max_len = cfg.sequence_length;
        let gen_sentences = filter_training(&data.train, &data.schema, max_len, true);
        let disc_sentences = filter_training(&data.train, &data.schema, max_len, false);
        let gen_corpus = encode_all(&gen_sentences, &data.vocab, max_len)?;
        let disc_corpus = encode_all(&disc_sentences, &data.vocab, max_len)?;
        if gen_corpus.is_empty() {
            return Err(Error::Empty("non-NA training corpus"));
        }
        Ok(Pipeline {
            cfg,
            data,
            gen_corpus,
            disc_corpus,
            labels: data.schema.non_na(),
        })
    }

    pub fn phase_rng(&self, phase: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(phase as u64 + 1);
        rng
    }

    pub fn new_generator(&self) -> Result<Generator> {
        let gc = self
            .cfg
            .generator_config(self.data.vocab.len(), self.data.schema.len());
        Generator::new(gc, &mut self.phase_rng(100))
    }

    pub fn new_discriminator(&self) -> Result<Discriminator> {
        let dc = self
            .cfg
            .discriminator_config(self.data.vocab.len(), self.data.schema.len());
        let mut d = Discriminator::new(dc, &mut self.phase_rng(101))?;
        if let Some(path) = &self.cfg.word_embeddings {
            let n = load_word_embeddings(&mut d, &self.data.vocab, path)?;
            log::info!("loaded {n} pretrained word vectors");
        }
        Ok(d)
    }

    pub fn load_generator(&self, path: impl AsRef<Path>) -> Result<Generator> {
        let gc = self
            .cfg
            .generator_config(self.data.vocab.len(), self.data.schema.len());
        Generator::from_params(gc, ParamStore::load(path)?)
    }

    pub fn load_discriminator(&self, path: impl AsRef<Path>) -> Result<Discriminator> {
        let dc = self
            .cfg
            .discriminator_config(self.data.vocab.len(), self.data.schema.len());
        Discriminator::from_params(dc, ParamStore::load(path)?)
    }

    /// Phase 1: MLE pretraining with scheduled sampling.
    pub fn pretrain_generator(&self) -> Result<(Generator, Vec<MetricsRow>)> {
        let run = || {
            let mut gen = self.new_generator()?;
            let mut rng = self.phase_rng(0);
            let hist = pretrain_generator(
                &mut gen,
                &self.gen_corpus,
                self.cfg.gen_pretrain_epochs,
                &self.cfg.mle_options(),
                &mut rng,
            )?;
            let rows = hist
                .iter()
                .map(|h| MetricsRow {
                    epoch: h.epoch,
                    phase: PHASES[0],
                    metrics: EpochMetrics {
                        gen_loss: Some(h.mean_loss),
                        ..EpochMetrics::default()
                    },
                })
                .collect();
            Ok((gen, rows))
        };
        run().map_err(phase_error(PHASES[0]))
    }

    /// Number of sentences generated for discriminator pretraining.
    pub fn fake_corpus_size(&self) -> usize {
        match self.cfg.fake_corpus_size {
            0 => self.gen_corpus.len(),
            n => n,
        }
    }

    /// Phase 2: sample a fake corpus from the pretrained generator.
    pub fn generate(&self, gen: &Generator, count: usize) -> Result<Vec<GeneratedSample>> {
        sample_fakes(gen, &self.labels, count, self.cfg.temperature, &mut self.phase_rng(1))
            .map_err(phase_error(PHASES[1]))
    }

    /// Encodes generated sentences read back from disk.
    pub fn encode_generated(&self, sentences: &[RelationalSentence]) -> Result<Vec<EncodedSentence>> {
        encode_all(sentences, &self.data.vocab, self.cfg.sequence_length)
    }

    /// Phase 3: discriminator pretraining on real and generated sentences.
    pub fn pretrain_discriminator(&self, fake: &[EncodedSentence]) -> Result<(Discriminator, Vec<MetricsRow>)> {
        let run = || {
            let mut disc = self.new_discriminator()?;
            let mut rng = self.phase_rng(2);
            let hist = pretrain_discriminator(
                &mut disc,
                &self.disc_corpus,
                fake,
                self.cfg.dis_pretrain_epochs,
                &self.cfg.disc_options(),
                &mut rng,
            )?;
            let rows = hist
                .iter()
                .map(|h| MetricsRow {
                    epoch: h.epoch,
                    phase: PHASES[2],
                    metrics: EpochMetrics {
                        l_s: Some(h.losses.source),
                        l_r: Some(h.losses.relation),
                        ..EpochMetrics::default()
                    },
                })
                .collect();
            Ok((disc, rows))
        };
        run().map_err(phase_error(PHASES[2]))
    }

    /// Phase 4: joint adversarial training, updating both models in place.
    pub fn adversarial(&self, gen: &mut Generator, disc: &mut Discriminator) -> Result<Vec<MetricsRow>> {
        let mut run = || {
            let cfg = self.cfg.adversarial_config();
            let mut rng = self.phase_rng(3);
            let mut rows = Vec::with_capacity(self.cfg.adversarial_epochs);
            for epoch in 1..=self.cfg.adversarial_epochs {
                let m = adversarial_epoch(
                    gen,
                    disc,
                    &self.gen_corpus,
                    &self.disc_corpus,
                    &self.labels,
                    &cfg,
                    &mut rng,
                )?;
                log::info!(
                    "adversarial epoch {epoch}: reward {:.4} L_S {:.4} L_R {:.4}",
                    m.mean_reward.unwrap_or(f64::NAN),
                    m.l_s.unwrap_or(f64::NAN),
                    m.l_r.unwrap_or(f64::NAN)
                );
                rows.push(MetricsRow {
                    epoch,
                    phase: PHASES[3],
                    metrics: m,
                });
            }
            Ok(rows)
        };
        run().map_err(phase_error(PHASES[3]))
    }

    /// Generated samples as corpus sentences.
    pub fn to_sentences(&self, samples: &[GeneratedSample]) -> Vec<RelationalSentence> {
        samples
            .iter()
            .filter_map(|s| s.to_sentence(&self.data.vocab))
            .collect()
    }

    /// Stream for qualitative sample dumps, separate from every phase.
    pub fn samples_rng(&self) -> ChaCha8Rng {
        self.phase_rng(PHASES.len())
    }

    /// Writes the config, vocabulary and schema the checkpoints depend on.
    pub fn write_setup(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), self.cfg.to_text())?;
        fs::write(dir.join(VOCAB_FILE), self.data.vocab.to_text())?;
        fs::write(dir.join(SCHEMA_FILE), self.data.schema.to_text())?;
        Ok(())
    }

    /// Runs all four phases in order, writing artifacts to `out` when given.
    pub fn run(&self, out: Option<&Path>) -> Result<PipelineOutput> {
        if let Some(dir) = out {
            self.write_setup(dir)?;
        }
        let mut phases = Vec::new();
        let mut metrics = Vec::new();
        let write_metrics = |rows: &[MetricsRow]| -> Result<()> {
            if let Some(dir) = out {
                fs::write(dir.join(METRICS_FILE), metrics_csv(rows))?;
            }
            Ok(())
        };

        log::info!("phase 1/4: {}", PHASES[0]);
        phases.push(PHASES[0]);
        let (gen, rows) = self.pretrain_generator()?;
        metrics.extend(rows);
        write_metrics(&metrics)?;
        if let Some(dir) = out {
            gen.params.save(dir.join(GEN_PRETRAINED_FILE))?;
        }

        log::info!("phase 2/4: {}", PHASES[1]);
        phases.push(PHASES[1]);
        let generated = self.generate(&gen, self.fake_corpus_size())?;
        if let Some(dir) = out {
            save_jsonl(dir.join(GENERATED_FILE), &self.to_sentences(&generated), &self.data.schema)?;
        }

        log::info!("phase 3/4: {}", PHASES[2]);
        phases.push(PHASES[2]);
        let fake: Vec<EncodedSentence> = generated.iter().filter_map(GeneratedSample::encoded).collect();
        let (disc, rows) = self.pretrain_discriminator(&fake)?;
        metrics.extend(rows);
        write_metrics(&metrics)?;
        if let Some(dir) = out {
            disc.params.save(dir.join(DIS_PRETRAINED_FILE))?;
        }

        log::info!("phase 4/4: {}", PHASES[3]);
        phases.push(PHASES[3]);
        let (mut g, mut d) = (gen.clone(), disc.clone());
        let rows = self.adversarial(&mut g, &mut d)?;
        metrics.extend(rows);
        write_metrics(&metrics)?;
        if let Some(dir) = out {
            g.params.save(dir.join(GEN_FILE))?;
            d.params.save(dir.join(DIS_FILE))?;
        }

        Ok(PipelineOutput {
            pretrained_generator: gen,
            pretrained_discriminator: disc,
            generator: g,
            discriminator: d,
            generated,
            metrics,
            phases,
        })
    }
}

/// Loads the configured data and runs every phase.
pub fn run_pipeline(cfg: &Config, out: Option<&Path>) -> Result<PipelineOutput> {
    let data = Dataset::load(cfg)?;
    Pipeline::new(cfg, &data)?.run(out)
}
