//! Command-line front end: `preprocess`, `train`, `detect`, `eval`, `serve`.
//!
//! Every subcommand flag can also come from a flat `key = value` file given
//! with `--config`; flags on the command line win. On failure a single JSON
//! line `{"error": kind, "message": text}` goes to stderr. Usage errors exit
//! with status 2, other failures with 1.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{DEFAULT_CONTAMINATION, DEFAULT_EVENT_THRESHOLD, DEFAULT_LOF_K};
use crate::error::{Error, Result};
use crate::eval::{
    generate_synthetic, load_labeled_jsonl, run_benchmark, BenchmarkConfig, SyntheticConfig, DEFAULT_KNN_K,
};
use crate::neural::ModelConfig;
use crate::service::{
    detect_run, preprocess_run, serve, train_run, DetectOptions, PreprocessOptions, RunStore, ServiceState,
};

#[derive(Debug, Parser)]
#[command(name = "seqlens", version, about = "Event sequence anomaly detection and comparison")]
struct Cli {
    /// Flat key = value file with defaults for subcommand flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest JSONL events into a new run directory.
    Preprocess(PreprocessArgs),
    /// Train the sequence VAE on a run's dataset.
    Train(TrainArgs),
    /// Score sequences, select anomalies and write their reports.
    Detect(DetectArgs),
    /// Benchmark VAE + LOF against kNN-LCS on labeled data.
    Eval(EvalArgs),
    /// Serve the JSON API for a completed run.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    /// JSONL file, one `{"id", "events": [{"t", "type"}]}` object per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, env = "RUN_DIR")]
    run: PathBuf,
    #[arg(long)]
    tfidf_threshold: Option<f64>,
    #[arg(long, default_value_t = 2)]
    min_len: usize,
    /// Round timestamps down to multiples of this width before grouping.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 300)]
    hidden_size: usize,
    #[arg(long, default_value_t = 16)]
    latent_dim: usize,
    #[arg(long, default_value_t = 80)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    w_kl_start: f64,
    #[arg(long, default_value_t = 0.5)]
    w_kl_end: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            hidden_size: self.hidden_size,
            latent_dim: self.latent_dim,
            batch_size: self.batch_size,
            w_kl_start: self.w_kl_start,
            w_kl_end: self.w_kl_end,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, env = "RUN_DIR")]
    run: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long, env = "RUN_DIR")]
    run: PathBuf,
    /// LOF neighbourhood size.
    #[arg(long, default_value_t = DEFAULT_LOF_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_CONTAMINATION)]
    contamination: f64,
    #[arg(long, default_value_t = DEFAULT_EVENT_THRESHOLD)]
    event_threshold: f64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Labeled JSONL (`label` field per line). Synthetic data when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_sequences: usize,
    #[arg(long, default_value_t = 20)]
    vocab_size: usize,
    #[arg(long, default_value_t = 4)]
    patterns: usize,
    #[arg(long, default_value_t = 0.05)]
    anomaly_rate: f64,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = 32)]
    hidden_size: usize,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 5e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LOF_K)]
    lof_k: usize,
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    knn_k: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "RUN_DIR")]
    run: PathBuf,
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, got `{line}`"),
        })?;
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((key, value));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn long_flags(cmd: &clap::Command) -> Vec<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(String::from))
        .collect()
}

/// Appends flags from the config file that the command line does not set.
/// Keys belonging to other subcommands are skipped; keys no subcommand
/// knows are an error.
fn merge_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let given: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let root = Cli::command();
    let sub = given
        .iter()
        .skip(1)
        .find_map(|g| root.find_subcommand(g.as_str()));
    let known: Vec<String> = root.get_subcommands().flat_map(long_flags).collect();
    let accepted = sub.map(long_flags).unwrap_or_default();
    for (key, value) in parse_config_file(&text)? {
        if !known.contains(&key) {
            return Err(Error::Parameter(format!(
                "{}: unknown key `{key}`",
                path.display()
            )));
        }
        if !accepted.contains(&key) {
            continue;
        }
        let flag = format!("--{key}");
        let present = given
            .iter()
            .any(|g| *g == flag || g.starts_with(&format!("{flag}=")));
        if present {
            continue;
        }
        match value.as_str() {
            "true" => args.push(flag.into()),
            "false" => {}
            _ => args.push(format!("{flag}={value}").into()),
        }
    }
    Ok(args)
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            error_line("usage", &e.to_string());
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            error_line("usage", &e.kind().to_string());
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            error_line(e.kind(), &e.to_string());
            1
        }
    }
}

pub fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Preprocess(a) => {
            let options = PreprocessOptions {
                tfidf_threshold: a.tfidf_threshold,
                min_len: a.min_len,
                bin_width: a.bin_width,
            };
            let store = preprocess_run(&a.input, &a.run, &options, a.force)?;
            let ds = store.dataset()?;
            Ok(json!({
                "run": store.root(),
                "sequences": ds.len(),
                "event_types": ds.vocabulary.len(),
            }))
        }
        Command::Train(a) => {
            let mut store = RunStore::open(&a.run)?;
            let ckpt = train_run(&mut store, &a.model.config())?;
            let last = ckpt.training_log.epochs.last();
            Ok(json!({
                "run": store.root(),
                "epochs": ckpt.training_log.epochs.len(),
                "final_loss": last.map(|e| e.loss),
                "final_reconstruction": last.map(|e| e.reconstruction),
            }))
        }
        Command::Detect(a) => {
            let mut store = RunStore::open(&a.run)?;
            let options = DetectOptions {
                k: a.k,
                contamination: a.contamination,
                event_threshold: a.event_threshold,
            };
            let reports = detect_run(&mut store, &options)?;
            Ok(json!({
                "run": store.root(),
                "anomalies": reports.iter().map(|r| &r.sequence_id).collect::<Vec<_>>(),
            }))
        }
        Command::Eval(a) => {
            let labeled = match &a.input {
                Some(path) => load_labeled_jsonl(path)?,
                None => generate_synthetic(&SyntheticConfig {
                    n_sequences: a.n_sequences,
                    vocab_size: a.vocab_size,
                    n_patterns: a.patterns,
                    anomaly_rate: a.anomaly_rate,
                    seed: a.data_seed,
                    ..SyntheticConfig::default()
                })?,
            };
            let config = BenchmarkConfig {
                model: ModelConfig {
                    hidden_size: a.hidden_size,
                    latent_dim: a.latent_dim,
                    batch_size: a.batch_size,
                    epochs: a.epochs,
                    learning_rate: a.learning_rate,
                    seed: a.seed,
                    ..ModelConfig::default()
                },
                lof_k: a.lof_k,
                knn_k: a.knn_k,
                split_seed: a.seed,
                ..BenchmarkConfig::default()
            };
            let report = run_benchmark(&labeled, &config)?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            write_file(&a.out.join("report.json"), report.to_json()?.as_bytes())?;
            write_file(&a.out.join("report.csv"), report.to_csv()?.as_bytes())?;
            Ok(json!({
                "out": a.out,
                "auc": report
                    .methods
                    .iter()
                    .map(|m| (m.method.name(), m.curve.auc))
                    .collect::<std::collections::BTreeMap<_, _>>(),
                "localization_recall": report.localization.as_ref().and_then(|l| l.recall),
            }))
        }
        Command::Serve(a) => {
            let store = RunStore::open(&a.run)?;
            let state = Arc::new(ServiceState::from_run(&store)?);
            let addr: SocketAddr = format!("{}:{}", a.host, a.port)
                .parse()
                .map_err(|e| Error::Parameter(format!("bad address: {e}")))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(&a.run, e))?;
            rt.block_on(serve(state, addr)).map_err(|e| Error::io(&a.run, e))?;
            Ok(json!({ "stopped": true }))
        }
    }
}
