//! Command-line front end: ingest, train, eval, predict and analyze.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hostility_core::corpus::Split;
use hostility_core::encoder::Backend;
use hostility_core::evaluation::EvalMode;

/// Exit 1 for invalid inputs, 2 for failures while running.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

#[derive(Parser)]
#[command(
    name = "hostility",
    version,
    about = "Hostility detection for Hindi posts"
)]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate corpus files and print label statistics.
    Ingest(IngestArgs),
    /// Train a head on frozen encoder features.
    Train(TrainArgs),
    /// Score a checkpoint or a predictions file against a labelled split.
    Eval(EvalArgs),
    /// Predict labels for an `id<TAB>text` file.
    Predict(PredictArgs),
    /// Count named entities per predicted class.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Split for every file; inferred from file names otherwise.
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub encoder: Option<Backend>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<EvalMode>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Hyper-parameter grid (TOML or JSON); selection uses the dev split.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Fine-grained checkpoint gated by the coarse one.
    #[arg(long)]
    pub fine_checkpoint: Option<PathBuf>,
    /// JSON-lines predictions instead of a checkpoint.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "dev")]
    pub split: Split,
    #[arg(long)]
    pub mode: Option<EvalMode>,
    /// `best` or a baseline model name.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub fine_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mode: Option<EvalMode>,
    /// JSON-lines output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "dev")]
    pub split: Split,
    #[arg(long, default_value_t = hostility_core::analysis::DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Count posts mentioning an entity rather than mentions.
    #[arg(long)]
    pub documents: bool,
    /// Extra entity list, one per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
