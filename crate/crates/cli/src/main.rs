//! `kbi` — train, evaluate and probe knowledge-base completion models.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 data or checkpoint
//! error, 3 training divergence. All commands are deterministic given the
//! same inputs and seeds; parallelism (rayon, capped by `KBI_THREADS`) never
//! changes results, only wall time.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use kbi_core::baselines::{evaluate_mfreq, BaselineMode};
use kbi_core::eval::{evaluate, EvalReport, Protocol};
use kbi_core::kb::{compute_stats, load_dataset, synth, write_dataset};
use kbi_core::models::ModelKind;
use kbi_core::persist::{load_checkpoint, save_checkpoint, Manifest, VocabCounts};
use kbi_core::training::{train, Loss, OovMode, TrainConfig};
use kbi_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kbi",
    version,
    about = "Knowledge-base completion with explicit out-of-vocabulary handling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and save the best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(EvalArgs),
    /// Print dataset statistics as JSON.
    Stats(StatsArgs),
    /// Evaluate a frequency baseline on the test split.
    Baseline(BaselineArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (train.txt, test.txt, optional valid.txt).
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint output directory.
    #[arg(long)]
    out: PathBuf,
    /// Model: e, f, transe, distmult, e+f-as, dm+f-as, dm+e+f-as, dm+f-al,
    /// dm+f-ral.
    #[arg(long)]
    model: Option<String>,
    /// KEY=VALUE defaults for the options below; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Loss: ll or mm (default: mm for transe, ll otherwise).
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    /// Negatives per direction per positive.
    #[arg(long)]
    neg: Option<usize>,
    /// Margin for the mm loss.
    #[arg(long)]
    margin: Option<f64>,
    /// OOV row handling: random, average or trained.
    #[arg(long = "oov-mode")]
    oov_mode: Option<String>,
    /// L2 penalty weight (dm+f-ral only).
    #[arg(long = "reg-lambda")]
    reg_lambda: Option<f64>,
    /// Validation cadence in epochs.
    #[arg(long = "eval-every")]
    eval_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint directory written by `kbi train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Ranking protocol: kbi (OOV-aware) or standard (legacy).
    #[arg(long, default_value = "kbi")]
    protocol: String,
    /// Seed for the legacy protocol's random vectors.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the summary JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-query detail TSV here.
    #[arg(long = "per-query")]
    per_query: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// mfreq-rel (count objects per relation) or mfreq-ent (per subject).
    #[arg(long)]
    baseline: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "per-query")]
    per_query: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Regime: latent-type, synonym or two-hop-path.
    #[arg(long)]
    regime: String,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    entities: Option<usize>,
    #[arg(long)]
    relations: Option<usize>,
    /// Latent type count (latent-type regime only).
    #[arg(long)]
    types: Option<usize>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    valid: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
}

fn main() {
    // Rust maps SIGPIPE to an Err that println! turns into a panic; restore
    // the default disposition so `kbi eval … | head` dies quietly like any
    // other Unix filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; those are not errors.
            let ok = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if ok { 0 } else { 1 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Honors KBI_THREADS for the rayon pool. Results do not depend on the
/// thread count; this is purely a resource cap.
fn init_thread_pool() -> Result<()> {
    if let Ok(v) = std::env::var("KBI_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("KBI_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config("KBI_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("could not size the thread pool: {e}")))?;
    }
    Ok(())
}

/// Parses a KEY=VALUE file ('#' comments and blank lines allowed) and checks
/// every key against the known training options.
fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    const KNOWN: &[&str] = &[
        "model",
        "loss",
        "dim",
        "lr",
        "epochs",
        "batch-size",
        "neg",
        "margin",
        "oov-mode",
        "reg-lambda",
        "eval-every",
        "seed",
    ];
    let text =
        fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected KEY=VALUE, got {raw:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN.contains(&key) {
            return Err(Error::Config(format!(
                "{}:{}: unknown option {key:?} (known: {})",
                path.display(),
                lineno + 1,
                KNOWN.join(", ")
            )));
        }
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {raw:?}")))
}

/// Flag beats config file beats built-in default.
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    file: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    match flag {
        Some(v) => Ok(v),
        None => match file.get(key) {
            Some(raw) => parse_value(key, raw),
            None => Ok(default),
        },
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let file = match &a.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };

    let model_name = match a.model.or_else(|| file.get("model").cloned()) {
        Some(m) => m,
        None => {
            return Err(Error::Config(
                "--model is required (or set model= in the config file)".into(),
            ))
        }
    };
    let kind: ModelKind = model_name.parse()?;

    let defaults = TrainConfig::default();
    let loss: Option<Loss> = match a.loss.or_else(|| file.get("loss").cloned()) {
        Some(s) => Some(s.parse()?),
        None => None,
    };
    let oov_mode: OovMode = match a.oov_mode.or_else(|| file.get("oov-mode").cloned()) {
        Some(s) => s.parse()?,
        None => defaults.oov_mode,
    };
    let cfg = TrainConfig {
        dim: resolve(a.dim, &file, "dim", defaults.dim)?,
        lr: resolve(a.lr, &file, "lr", defaults.lr)?,
        epochs: resolve(a.epochs, &file, "epochs", defaults.epochs)?,
        batch_size: resolve(a.batch_size, &file, "batch-size", defaults.batch_size)?,
        negatives: resolve(a.neg, &file, "neg", defaults.negatives)?,
        margin: resolve(a.margin, &file, "margin", defaults.margin)?,
        loss,
        oov_mode,
        reg_lambda: resolve(a.reg_lambda, &file, "reg-lambda", defaults.reg_lambda)?,
        eval_every: resolve(a.eval_every, &file, "eval-every", defaults.eval_every)?,
        seed: resolve(a.seed, &file, "seed", defaults.seed)?,
        ..defaults
    };

    let ds = load_dataset(&a.dataset)?;
    let outcome = train(&ds, kind, &cfg)?;

    let manifest = Manifest {
        model: kind.name().to_string(),
        dim: cfg.dim,
        loss: cfg.loss_for(kind).name().to_string(),
        epoch: outcome.best_epoch,
        valid_mrr: outcome.best_valid_mrr,
        counts: VocabCounts::of(&ds),
        vocab_fingerprint: ds.vocab.fingerprint(),
    };
    save_checkpoint(&a.out, &outcome.params, &manifest)?;

    let mut log_lines = String::new();
    for record in &outcome.log {
        log_lines.push_str(&serde_json::to_string(record)?);
        log_lines.push('\n');
    }
    fs::write(a.out.join("train_log.jsonl"), log_lines)?;

    let summary = serde_json::json!({
        "model": kind.name(),
        "checkpoint": a.out.display().to_string(),
        "best_epoch": outcome.best_epoch,
        "valid_mrr": outcome.best_valid_mrr,
        "diverged": outcome.divergence.is_some(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);

    // The checkpoint and log are on disk either way; a divergent run still
    // reports failure through the exit code.
    match outcome.divergence {
        Some(msg) => Err(Error::Divergence(msg)),
        None => Ok(()),
    }
}

fn emit_report(report: &EvalReport, ds: &kbi_core::kb::Dataset, out: Option<&Path>, per_query: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(&report.to_json())?;
    println!("{json}");
    if let Some(path) = out {
        fs::write(path, json + "\n")?;
    }
    if let Some(path) = per_query {
        fs::write(path, report.per_query_tsv(ds))?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let protocol: Protocol = a.protocol.parse()?;
    let ds = load_dataset(&a.dataset)?;
    let (params, _manifest) = load_checkpoint(&a.checkpoint, &ds)?;
    let report = evaluate(&params, &ds, protocol, a.seed);
    emit_report(&report, &ds, a.out.as_deref(), a.per_query.as_deref())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let stats = compute_stats(&ds);
    println!("{}", serde_json::to_string_pretty(&stats.to_json())?);
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let mode: BaselineMode = a.baseline.parse()?;
    let ds = load_dataset(&a.dataset)?;
    let report = evaluate_mfreq(&ds, mode);
    emit_report(&report, &ds, a.out.as_deref(), a.per_query.as_deref())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let regime: synth::Regime = a.regime.parse()?;
    let mut cfg = synth::SynthConfig::new(regime, a.seed);
    if let Some(v) = a.entities {
        cfg.entities = v;
    }
    if let Some(v) = a.relations {
        cfg.relations = v;
    }
    if let Some(v) = a.types {
        cfg.types = v;
    }
    if let Some(v) = a.train {
        cfg.train = v;
    }
    if let Some(v) = a.valid {
        cfg.valid = v;
    }
    if let Some(v) = a.test {
        cfg.test = v;
    }
    let ds = synth::generate(&cfg)?;
    write_dataset(&ds, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&compute_stats(&ds).to_json())?);
    Ok(())
}
