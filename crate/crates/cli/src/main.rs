//! `aerial-iot` command line: single snapshots, horizon runs, parameter
//! sweeps and brute-force comparisons driven by a TOML scenario file.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 on a bad configuration and
//! 3 when a snapshot leaves devices unserved (its outputs are still written).

mod commands;
mod config;
mod output;

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Io { .. } => 1,
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aerial-iot", version, about = "Aerial base station placement and power control for IoT uplinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one deployment with every device active.
    Snapshot {
        #[command(flatten)]
        common: Common,
        /// Metrics CSV for the snapshot.
        #[arg(long, value_name = "PATH")]
        metrics: Option<PathBuf>,
        /// Add the stationary grid deployment to the metrics.
        #[arg(long)]
        baseline: bool,
    },
    /// Simulate the update schedule and write one metrics row per update.
    Horizon {
        #[command(flatten)]
        common: Common,
        /// Independent runs with seeds `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 1, value_name = "N")]
        runs: u64,
        /// Add paired stationary rows with the same run ids.
        #[arg(long)]
        baseline: bool,
        /// Report reliability per run instead of per update.
        #[arg(long)]
        per_horizon: bool,
    },
    /// Repeat paired horizon runs over values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: commands::Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1, value_name = "N")]
        runs: u64,
    },
    /// Compare snapshots against an exhaustive grid search on tiny instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1, value_name = "N")]
        runs: u64,
        /// Global grid spacing, metres.
        #[arg(long, default_value_t = 10.0)]
        coarse_m: f64,
        /// Refinement grid spacing, metres.
        #[arg(long, default_value_t = 1.0)]
        fine_m: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Snapshot { common, metrics, baseline } => commands::snapshot(&common, metrics.as_deref(), baseline),
        Command::Horizon { common, runs, baseline, per_horizon } => commands::horizon(&common, runs, baseline, per_horizon),
        Command::Sweep { common, axis, values, runs } => commands::sweep(&common, axis, &values, runs),
        Command::Oracle { common, runs, coarse_m, fine_m } => commands::oracle(&common, runs, coarse_m, fine_m),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aerial-iot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
