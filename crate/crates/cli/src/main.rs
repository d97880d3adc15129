use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acgan_core::adversarial::{
    splice_metrics, Dataset, MetricsRow, Pipeline, CONFIG_FILE, DIS_FILE, DIS_PRETRAINED_FILE, GENERATED_FILE,
    GEN_FILE, GEN_PRETRAINED_FILE, METRICS_FILE, PHASES, SAMPLES_FILE,
};
use acgan_core::config::Config;
use acgan_core::corpus::{encode_all, filter_training, load_jsonl, save_jsonl, stats};
use acgan_core::harness::{auc, compare_augmentation, held_out_eval, pr_csv, write_samples};
use acgan_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "acgan", version, about = "Adversarial data augmentation for relation extraction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Config file (`key = value` lines). Defaults to OUT/config.txt when it exists.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Extra `key=value` config override; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample train/test corpora from the relation grammar.
    SynthCorpus,
    /// Pretrain the generator by maximum likelihood.
    PretrainGen,
    /// Sample the fake corpus from the pretrained generator.
    Generate {
        /// Generator checkpoint; defaults to OUT/generator.pretrained.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write K sentences per relation to OUT/samples.txt.
        #[arg(long, value_name = "K")]
        dump: Option<usize>,
    },
    /// Pretrain the discriminator on real data and OUT/generated.jsonl.
    PretrainDis,
    /// Joint adversarial training from the pretrained checkpoints.
    Adversarial,
    /// Held-out PR curve and AUC of a discriminator on the test corpus.
    Eval {
        /// Discriminator checkpoint; defaults to OUT/discriminator.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// PR curve CSV; defaults to OUT/pr.csv.
        #[arg(long)]
        pr: Option<PathBuf>,
    },
    /// Baseline versus augmented classifier over the experiment seeds.
    Compare {
        /// Report JSON; defaults to OUT/report.json.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// All four training phases in one go.
    Run {
        /// Also write K sentences per relation from the final generator.
        #[arg(long, value_name = "K")]
        dump: Option<usize>,
    },
}

fn load_config(g: &Global) -> Result<Config> {
    let from_out = g.out.join(CONFIG_FILE);
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None if from_out.exists() => Config::load(&from_out)?,
        None => Config::default(),
    };
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Later phases must see the config the first phase recorded.
fn check_recorded(cfg: &Config, out: &Path) {
    match Config::load(out.join(CONFIG_FILE)) {
        Ok(rec) if rec.fingerprint() != cfg.fingerprint() => {
            log::warn!("config differs from {}; artifacts may not match", out.join(CONFIG_FILE).display())
        }
        Ok(_) => {}
        Err(_) => log::warn!("no recorded config in {}", out.display()),
    }
}

fn update_metrics(out: &Path, phase: &str, rows: &[MetricsRow]) -> Result<()> {
    let path = out.join(METRICS_FILE);
    let existing = match fs::read_to_string(&path) {
        Ok(s) => Some(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    fs::write(path, splice_metrics(existing.as_deref(), phase, rows)?)?;
    Ok(())
}

fn synth_corpus(cfg: &Config, out: &Path) -> Result<()> {
    let mut synth = cfg.clone();
    synth.train_path = None;
    synth.test_path = None;
    synth.schema_path = None;
    let data = Dataset::load(&synth)?;
    fs::create_dir_all(out)?;
    save_jsonl(out.join("train.jsonl"), &data.train, &data.schema)?;
    save_jsonl(out.join("test.jsonl"), &data.test, &data.schema)?;
    fs::write(out.join("schema.txt"), data.schema.to_text())?;
    let st = stats(&data.train, &data.schema);
    println!(
        "wrote {} train and {} test sentences to {} (mean length {:.1}, max {})",
        data.train.len(),
        data.test.len(),
        out.display(),
        st.mean_len,
        st.max_len
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out.as_path();
    let cfg = load_config(g)?;
    if let Command::SynthCorpus = cli.command {
        return synth_corpus(&cfg, out);
    }
    if let Command::Compare { report } = &cli.command {
        let rep = compare_augmentation(&cfg)?;
        let path = report.clone().unwrap_or_else(|| out.join("report.json"));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, serde_json::to_string_pretty(&rep)? + "\n")?;
        print!("{}", rep.summary());
        println!("report written to {}", path.display());
        return Ok(());
    }

    let data = Dataset::load(&cfg)?;
    let p = Pipeline::new(&cfg, &data)?;
    match &cli.command {
        Command::SynthCorpus | Command::Compare { .. } => unreachable!("handled above"),
        Command::PretrainGen => {
            p.write_setup(out)?;
            let (gen, rows) = p.pretrain_generator()?;
            gen.params.save(out.join(GEN_PRETRAINED_FILE))?;
            update_metrics(out, PHASES[0], &rows)?;
            if let Some(last) = rows.last().and_then(|r| r.metrics.gen_loss) {
                println!("generator pretrained for {} epochs, final loss {last:.4}", rows.len());
            }
        }
        Command::Generate { checkpoint, dump } => {
            check_recorded(&cfg, out);
            let ckpt = checkpoint.clone().unwrap_or_else(|| out.join(GEN_PRETRAINED_FILE));
            let gen = p.load_generator(&ckpt)?;
            let generated = p.generate(&gen, p.fake_corpus_size())?;
            save_jsonl(out.join(GENERATED_FILE), &p.to_sentences(&generated), &data.schema)?;
            println!("wrote {} generated sentences", generated.len());
            if let Some(k) = *dump {
                let path = out.join(SAMPLES_FILE);
                write_samples(&path, &gen, &data.vocab, &data.schema, k, cfg.temperature, &mut p.samples_rng())?;
                println!("samples written to {}", path.display());
            }
        }
        Command::PretrainDis => {
            check_recorded(&cfg, out);
            let generated = load_jsonl(out.join(GENERATED_FILE), &data.schema)?;
            let fake = p.encode_generated(&generated)?;
            let (disc, rows) = p.pretrain_discriminator(&fake)?;
            disc.params.save(out.join(DIS_PRETRAINED_FILE))?;
            update_metrics(out, PHASES[2], &rows)?;
            if let Some(last) = rows.last() {
                println!(
                    "discriminator pretrained for {} epochs, final L_S {:.4} L_R {:.4}",
                    rows.len(),
                    last.metrics.l_s.unwrap_or(f64::NAN),
                    last.metrics.l_r.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Adversarial => {
            check_recorded(&cfg, out);
            let mut gen = p.load_generator(out.join(GEN_PRETRAINED_FILE))?;
            let mut disc = p.load_discriminator(out.join(DIS_PRETRAINED_FILE))?;
            let rows = p.adversarial(&mut gen, &mut disc)?;
            gen.params.save(out.join(GEN_FILE))?;
            disc.params.save(out.join(DIS_FILE))?;
            update_metrics(out, PHASES[3], &rows)?;
            report_rewards(&rows);
        }
        Command::Eval { checkpoint, pr } => {
            let ckpt = checkpoint.clone().unwrap_or_else(|| out.join(DIS_FILE));
            let disc = p.load_discriminator(&ckpt)?;
            let max_len = cfg.sequence_length;
            let test = encode_all(&filter_training(&data.test, &data.schema, max_len, false), &data.vocab, max_len)?;
            let points = held_out_eval(&disc, &test, &data.schema)?;
            let path = pr.clone().unwrap_or_else(|| out.join("pr.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, pr_csv(&points))?;
            println!("AUC {:.6} over {} test sentences ({} PR points in {})", auc(&points)?, test.len(), points.len(), path.display());
        }
        Command::Run { dump } => {
            let result = p.run(Some(out))?;
            report_rewards(&result.metrics);
            if let Some(k) = *dump {
                let path = out.join(SAMPLES_FILE);
                let gen = &result.generator;
                write_samples(&path, gen, &data.vocab, &data.schema, k, cfg.temperature, &mut p.samples_rng())?;
                println!("samples written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn report_rewards(rows: &[MetricsRow]) {
    let rewards: Vec<f64> = rows
        .iter()
        .filter(|r| r.phase == PHASES[3])
        .filter_map(|r| r.metrics.mean_reward)
        .collect();
    if let (Some(first), Some(last)) = (rewards.first(), rewards.last()) {
        println!("adversarial training: mean reward {first:.4} at epoch 1, {last:.4} at epoch {}", rewards.len());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
