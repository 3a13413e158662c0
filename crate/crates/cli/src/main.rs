//! `stancebench` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stancebench_core::{AttackKind, DatasetKey};

#[derive(Debug, Parser)]
#[command(name = "stancebench", version, about = "Stance detection robustness benchmark")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to these datasets (repeatable or comma separated).
    #[arg(long = "dataset", global = true, value_delimiter = ',')]
    datasets: Vec<DatasetKey>,
    /// Restrict to these attacks.
    #[arg(long = "attack", global = true, value_delimiter = ',')]
    attacks: Vec<AttackKind>,
    /// Master seed for splits, attacks and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize `<raw>/<dataset>/` files into `<dataset>.records.jsonl`.
    Ingest(IngestArgs),
    /// Assign splits and write `<dataset>.<split>.jsonl` plus a manifest.
    Split(DataArgs),
    /// Write low-resource train manifests.
    Subsample(SubsampleArgs),
    /// Build attack sets from the test splits.
    Attack(DataArgs),
    /// Estimate the correctness ratio of every attack.
    Correctness(CorrectnessArgs),
    /// Collect predictions from an endpoint or fixture directory.
    Predict(PredictArgs),
    /// Score predictions and write the score matrix.
    Evaluate(EvaluateArgs),
    /// Render report tables from a score matrix.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub(crate) struct DataArgs {
    /// Directory holding normalized data; overrides `data_dir`.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Directory with the raw downloads; overrides `raw_dir`.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct SubsampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Ratios as percentages or fractions, e.g. `10,30,70,100`.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
}

#[derive(Debug, Args)]
struct CorrectnessArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Manual paraphrase judgments CSV (dataset,id,equal,note).
    #[arg(long)]
    judgments: Option<PathBuf>,
    #[arg(long)]
    sample_size: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Only this system from the config; required when no config lists systems.
    #[arg(long)]
    system: Option<String>,
    /// Model seeds to request.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Base URL of a `/predict` server.
    #[arg(long, conflicts_with = "fixtures")]
    endpoint: Option<String>,
    /// Fixture directory laid out as `<system>/seed<n>/<dataset>.<eval_set>.jsonl`.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Response cache directory.
    #[arg(long, env = "STANCEBENCH_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Prediction directory; defaults to `<out>/predictions`.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Correctness file; defaults to `<out>/correctness.json`.
    #[arg(long)]
    correctness: Option<PathBuf>,
    /// Also score low-resource runs named `<system>@r<percent>`.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Score matrix JSON; defaults to `<out>/scores.json`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// all, performance or robustness.
    #[arg(long, default_value = "all")]
    table: String,
    /// text, csv or json.
    #[arg(long, default_value = "text")]
    style: String,
    /// Relative resilience formula: parenthesized or literal.
    #[arg(long, default_value = "parenthesized")]
    formula: String,
    /// Low-resource scores JSON to render instead of the matrix.
    #[arg(long)]
    low_resource: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
