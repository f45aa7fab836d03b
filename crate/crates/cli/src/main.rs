// SPDX-License-Identifier: MIT OR Apache-2.0

//! `lagxai`: fit, profile and evaluate affine operators between embedding
//! spaces from the command line.
//!
//! Every subcommand reads and writes plain files and prints a one-line JSON
//! summary (with a `schema` field) to standard output. Exit status: 0 on
//! success, 1 for usage errors, 2 for I/O or format errors, 3 for numerical
//! failures.

#![forbid(unsafe_code)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lagxai_core::error::ErrorKind;
use lagxai_core::FitConfig;

pub const SUMMARY_SCHEMA: &str = "lagxai.summary/1";

#[derive(Debug, Parser)]
#[command(
    name = "lagxai",
    version,
    about = "Regularized affine operators between embedding spaces"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "LAGXAI_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random choice (clustering, bootstrap).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct FitArgs {
    #[arg(long, default_value_t = 5000.0)]
    pub lambda_ortho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_equiv: f64,
    /// Number of principal drift directions.
    #[arg(long = "r", default_value_t = 5)]
    pub r: usize,
    /// Absolute singular-value cutoff of the pseudoinverse.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Fit on the vectors as stored instead of L2-normalizing them first.
    #[arg(long)]
    pub no_normalize: bool,
}

impl FitArgs {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            lambda_ortho: self.lambda_ortho,
            lambda_equiv: self.lambda_equiv,
            r: self.r,
            tau: self.tau,
            normalize_input: !self.no_normalize,
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// Pair file (`.lage` binary or `.csv`).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Relabel pairs from their raw scores (score >= T is positive). Applied
    /// automatically with T = 3 when a file has scores but no labels.
    #[arg(long)]
    pub binarize: Option<f32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// L2-normalize both sides of every pair.
    Normalize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the global operator on the positive pairs.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Geometric profile of an operator.
    Profile {
        /// Operator file, or `identity` with `--dim`.
        #[arg(long)]
        op: String,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-pair angle, residual, hybrid score and local operator profile.
    PairProfiles {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated pair indices; all pairs when omitted.
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
        /// Neighbourhood size of the local refit; 0 skips it.
        #[arg(long, default_value_t = 32)]
        k_neighbors: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hybrid-score ROC-AUC with a bootstrap interval.
    Eval {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        input: InputArgs,
        /// Also report the cosine-baseline AUC and relative accuracy.
        #[arg(long)]
        baseline: bool,
        #[arg(long, default_value_t = 1000)]
        n_boot: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hyperparameter grid: fit on `--train`, score on `--eval`.
    Grid {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![100.0, 500.0, 1000.0, 5000.0])]
        lambda_ortho: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0])]
        lambda_equiv: Vec<f64>,
        #[arg(long = "r", value_delimiter = ',', default_values_t = vec![5])]
        r: Vec<usize>,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long)]
        no_normalize: bool,
        #[arg(long)]
        binarize: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Residual threshold at a percentile of the positive pairs' errors.
    Calibrate {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 90.0)]
        percentile: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flag pairs whose residual exceeds the threshold. Negative labels mark
    /// anomalies, positive labels legitimate pairs.
    Detect {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global versus per-cluster operators on train and eval splits.
    Scenarios {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        n_boot: usize,
        /// Reference AUC for relative accuracy; the eval split's cosine
        /// baseline when omitted.
        #[arg(long)]
        baseline_auc: Option<f64>,
        #[arg(long)]
        binarize: Option<f32>,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Angle, residual, cosine and label per pair as CSV.
    Corridor {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        input: InputArgs,
        /// Written to the header line for plotting.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lagxai_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Invalid => 1,
                ErrorKind::Io => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
