use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod exit;

use config::RunConfig;
use exit::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON run configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for the generator, the folds and every model.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for fold-parallel cross-validation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file of the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Format of what is printed to stdout.
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(name = "fh-tabnet", version, about = "Multi-stage TabNet cascade for FH risk staging")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cohort CSV and its schema sidecar.
    Synth,
    /// Drop sparse columns and incomplete rows; write the cleaned CSV.
    Preprocess {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Train a cascade on a labelled CSV and write its checkpoint.
    Train {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Print every epoch's loss after training.
        #[arg(long)]
        verbose: bool,
    },
    /// Stratified cross-validation of the cascade and the baselines.
    Cv {
        /// Labelled CSV; a synthetic cohort from the config is used when absent.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Predict a CSV of rows with a trained cascade.
    Predict {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Rank features per stage from the attention masks.
    Explain {
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Render a metrics JSON file as a table.
    Report {
        #[arg(long, value_name = "PATH")]
        metrics: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let resolved = config::resolve(file, cli.global.seed, cli.global.jobs)?;
    let ctx = commands::Context::new(&cli.global, resolved);
    match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Preprocess { data } => commands::preprocess(&ctx, data),
        Command::Train { data, verbose } => commands::train(&ctx, data, verbose),
        Command::Cv { data } => commands::cv(&ctx, data),
        Command::Predict { model, data } => commands::predict(&ctx, model, data),
        Command::Explain { model, data } => commands::explain(&ctx, model, data),
        Command::Report { metrics } => commands::report(&ctx, metrics),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
