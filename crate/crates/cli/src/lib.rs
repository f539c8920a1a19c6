//! Command-line front end for the `blufs` library: config handling,
//! experiment commands and reproducible artifact output.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{execute, rerun, Command, Metadata, Options};
pub use config::{parse_config, parse_config_str, DatasetSource, Method, RunConfig};
pub use error::{CliError, Result};

const DEFAULT_OUT: &str = "blufs-out";

#[derive(Debug, Parser)]
#[command(name = "blufs", version, about = "Bi-level unsupervised feature selection")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for evaluation and grid cells (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Use the raw features instead of z-scores.
    #[arg(long, global = true)]
    pub no_standardize: bool,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Write a generated dataset as CSV.
    Synth,
    /// Rank features and write the solver trace.
    Select,
    /// k-means ACC/NMI over the configured feature counts and seeds.
    EvalCluster,
    /// k-NN accuracy over random train/test splits.
    EvalClassify,
    /// Sweep lambda, alpha, beta and mu over {1e-4, ..., 1e3}.
    Grid {
        /// Sweep (alpha, beta) at mu = lambda = 1, then (mu, lambda) at the best pair.
        #[arg(long)]
        coarse: bool,
    },
    /// Write only the convergence trace.
    Trace,
    /// Replay a run from its `.meta.json` file.
    Rerun { metadata: PathBuf },
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let opts = Options { workers: cli.workers };
    let cmd = match cli.command {
        CliCommand::Rerun { metadata } => {
            if cli.config.is_some() || cli.seed.is_some() || cli.no_standardize {
                return Err(CliError::Config(
                    "rerun replays the recorded config; drop `--config`, `--seed` and `--no-standardize`".into(),
                ));
            }
            let out = cli
                .out
                .ok_or_else(|| CliError::Config("`--out` is required for rerun".into()))?;
            return rerun(&metadata, &out, &opts);
        }
        CliCommand::Synth => Command::Synth,
        CliCommand::Select => Command::Select,
        CliCommand::EvalCluster => Command::EvalCluster,
        CliCommand::EvalClassify => Command::EvalClassify,
        CliCommand::Grid { coarse } => Command::Grid { coarse },
        CliCommand::Trace => Command::Trace,
    };
    let path = cli
        .config
        .ok_or_else(|| CliError::Config(format!("`--config` is required for {cmd}")))?;
    let mut cfg = parse_config(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.no_standardize {
        cfg.standardize = false;
    }
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    execute(cmd, &cfg, &out, &opts)
}
