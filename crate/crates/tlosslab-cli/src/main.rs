//! Experiment runner for the tlosslab robust-loss toolkit.
//!
//! Exit codes: 0 success, 1 check failure or runtime error, 2 config error.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tlosslab::Error;
use tlosslab_cli::cmd;

#[derive(Parser)]
#[command(
    name = "tlosslab",
    version,
    about = "Robust-loss segmentation experiments on synthetic data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ellipse dataset (PGM files plus index.json).
    GenData {
        /// Dataset config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt the training labels of an exported dataset.
    InjectNoise {
        /// Noise config JSON (data_dir, alpha, beta, seed).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the corrupted copy plus manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full losses x noise levels x seeds grid.
    Sweep {
        /// Sweep config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweep cells (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Verify every analytic gradient against finite differences.
    GradCheck,
    /// Verify the loss's small- and large-residual asymptotic slopes.
    LimitsCheck,
}

/// `TLOSSLAB_SEED` replaces every seed in the loaded config for quick
/// deterministic smoke runs.
fn seed_override() -> Result<Option<u64>, Error> {
    match std::env::var("TLOSSLAB_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|e| Error::Config(format!("TLOSSLAB_SEED {text:?}: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("TLOSSLAB_SEED: {e}"))),
    }
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let seed = seed_override()?;
    match &cli.command {
        Command::GenData { config, out } => cmd::gen_data(config, out, seed, cli.json),
        Command::InjectNoise { config, out } => cmd::inject_noise(config, out, seed, cli.json),
        Command::Sweep { config, out, jobs } => {
            cmd::sweep(config, out.as_deref(), *jobs, seed, cli.json)
        }
        Command::GradCheck => cmd::grad_check(seed, cli.json),
        Command::LimitsCheck => cmd::limits_check(cli.json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
