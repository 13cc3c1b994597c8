//! Command-line driver: `sentalpha <synth|ingest|analyze|select|backtest>`.
//!
//! Every command writes into `--out` and finishes by writing a
//! `manifest.json` listing its settings, input digests and output files.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "sentalpha", version, about = "Sentiment-augmented return-sign prediction")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run seed; every random draw derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel training.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic bars + tweets dataset with planted signal.
    Synth(commands::SynthArgs),
    /// Align bars to the calendar and count tweet sentiment per session.
    Ingest(commands::IngestArgs),
    /// Correlations, lagged cross-correlation and autocorrelation.
    Analyze(commands::AnalyzeArgs),
    /// Feature selection by RFE tuned with Bayesian optimization.
    Select(commands::SelectArgs),
    /// Walk-forward backtest of one or more strategies.
    Backtest(commands::BacktestArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs, impossible settings.
    #[error("{0:#}")]
    Input(anyhow::Error),
    #[error("{0:#}")]
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

pub(crate) trait ResultExt<T> {
    /// Classify an error as the caller's fault (exit code 2).
    fn input(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn input(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Input(e.into()))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => config::FileConfig::load(p).input()?,
        None => config::FileConfig::default(),
    };
    if let Some(n) = cli.global.threads.or(file.threads) {
        if n == 0 {
            return Err(CliError::Input(anyhow::anyhow!("--threads must be >= 1")));
        }
        // A pool may already exist when commands run in-process (tests).
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    let ctx = commands::Context::new(&cli.global, file)?;
    match &cli.command {
        Command::Synth(a) => commands::cmd_synth(&ctx, a),
        Command::Ingest(a) => commands::cmd_ingest(&ctx, a),
        Command::Analyze(a) => commands::cmd_analyze(&ctx, a),
        Command::Select(a) => commands::cmd_select(&ctx, a),
        Command::Backtest(a) => commands::cmd_backtest(&ctx, a),
    }
}
