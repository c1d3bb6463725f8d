//! `toxens` command-line pipeline: ingest, train, stack, evaluate, correlate
//! and triage from one INI configuration, with a run manifest per command.

pub mod commands;
pub mod config;
pub mod layout;
pub mod manifest;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "toxens", version, about = "Toxic comment classification workbench")]
pub struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel fits.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Single-threaded execution everywhere.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Artifact root (default `toxens-out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the dataset and write the canonical corpus.
    Ingest,
    /// Train subword skip-gram embeddings.
    EmbedTrain,
    /// Train configured models on the train split.
    Fit {
        /// Restrict to these models (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Score train and test splits with trained models.
    Predict {
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Out-of-fold base predictions for stacking.
    Oof,
    /// Train the cross-validated stackers and predict the test split.
    Stack {
        /// Also fit stackers without the comment meta-features.
        #[arg(long)]
        ablate_meta: bool,
    },
    /// Score prediction sets against test gold.
    Evaluate {
        /// Prediction CSVs to evaluate instead of every stored set.
        #[arg(long = "predictions")]
        predictions: Vec<PathBuf>,
        /// Threshold vector JSON to apply.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Search per-class thresholds on train predictions.
    Thresholds,
    /// Pearson correlation between two models' test scores.
    Correlate {
        /// `a:b` pairs of prediction sets (repeatable).
        #[arg(long = "pair")]
        pairs: Vec<String>,
    },
    /// Error triage sessions.
    Triage {
        #[command(subcommand)]
        action: TriageCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum TriageCommand {
    /// Sample false negatives or false positives into a session file.
    Sample {
        #[arg(long)]
        class: Option<String>,
        /// `fn` or `fp`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Prediction set to triage (default from config, else `ensemble`).
        #[arg(long)]
        predictions: Option<String>,
        /// Replace an existing session file.
        #[arg(long)]
        force: bool,
    },
    /// Serve the annotation API.
    Serve {
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Print tag frequencies of a session.
    Report {
        #[arg(long)]
        session: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
