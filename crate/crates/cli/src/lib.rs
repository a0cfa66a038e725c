//! `mrseq`: ingest, curate, train, classify and evaluate prostate MRI series,
//! plus synthetic data generation and metadata plots.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

mod commands;
mod io;
mod scan;

use std::ffi::OsString;
use std::path::Path;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use io::{config_hash, ManifestRow, PredictionRow, SkipRow};
pub use scan::{scan_directory, ScanResult, ScannedSeries};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "MRSEQ_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mrseq",
    version,
    about = "Prostate MRI series classification (T2W, DWI, ADC, DCE)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a directory of DICOM files into a per-series manifest.
    Ingest(commands::ingest::Args),
    /// Assign ground-truth labels from SeriesDescription rules.
    Curate(commands::curate::Args),
    /// Split patients, train a k-fold ensemble and save it.
    Train(commands::train::Args),
    /// Predict series classes with a saved ensemble.
    Classify(commands::classify::Args),
    /// Score predictions against curated labels.
    Evaluate(commands::evaluate::Args),
    /// Generate a synthetic DICOM dataset.
    Synth(commands::synth::Args),
    /// Export the metadata distribution as CSV and HTML.
    Plot(commands::plot::Args),
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {value:?}")))?;
    // A pool may already exist when run() is called more than once in-process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    match cli.command {
        Command::Ingest(a) => commands::ingest::run(&a),
        Command::Curate(a) => commands::curate::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Classify(a) => commands::classify::run(&a),
        Command::Evaluate(a) => commands::evaluate::run(&a),
        Command::Synth(a) => commands::synth::run(&a),
        Command::Plot(a) => commands::plot::run(&a),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mrseq: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{what} {} is not a readable file",
            path.display()
        )))
    }
}

pub(crate) fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{what} {} is not a readable directory",
            path.display()
        )))
    }
}
