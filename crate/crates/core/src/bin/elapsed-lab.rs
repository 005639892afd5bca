//! Command line front end for the experiment runners.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use time_elapsed::config::ExperimentConfig;
use time_elapsed::experiments::{run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "elapsed-lab", version, about = "Time-elapsed neuron network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized checks, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Steady states and uniqueness margins over the eps sweep.
    Steady,
    /// Nonlinear relaxation towards the steady state.
    Relax,
    /// Spectra of the linearized generators.
    Spectrum,
    /// Empirical basin of attraction.
    Basin,
    /// Built-in invariant suites.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Steady => Command::Steady,
        Sub::Relax => Command::Relax,
        Sub::Spectrum => Command::Spectrum,
        Sub::Basin => Command::Basin,
        Sub::Check => Command::Check,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let config = match ExperimentConfig::from_path(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let opts = RunOptions {
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
    };
    match run(command, &config, &opts) {
        Ok(manifest) => {
            for c in manifest.checks.iter().filter(|c| !c.passed) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            println!(
                "{}: {} files, {}/{} checks passed",
                command.name(),
                manifest.files.len(),
                manifest.checks.iter().filter(|c| c.passed).count(),
                manifest.checks.len()
            );
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
