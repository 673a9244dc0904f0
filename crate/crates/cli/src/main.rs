//! Batch front end: fixtures, experiment orchestration, JSON reports, CSV
//! trajectory export.
//!
//! Exit codes: 0 success, 1 a check failed or a computation error occurred,
//! 2 invalid configuration. Reports are deterministic for a fixed config and
//! seed; wall-clock timing lives in a separate `timing` field so reports can
//! be compared byte-for-byte without it.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fhj", version, about = "fractional Hamilton-Jacobi toolkit")]
struct Cli {
    /// JSON configuration file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for report and trajectory files (stdout only when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Grid-size override.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fractional-calculus checks: power law, semigroup, round trip.
    Fracops,
    /// Metric-bound sweep on seeded path pairs.
    Metric,
    /// Integrate one characteristic and export it as CSV.
    Characteristics,
    /// Build the functional tower and verify its certified inequalities.
    LyapunovCheck {
        /// Fractional order override.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Envelope bracket at a seeded point.
    Value,
    /// Upper/lower stability checks for a named candidate.
    Stability,
    /// Coupled monotone-witness sweeps.
    Witness,
    /// Run a named verification suite.
    Verify {
        /// fraccalc | metric | lyapunov | minimax | all
        #[arg(long)]
        suite: Option<String>,
    },
    /// List built-in problem fixtures.
    ListFixtures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = commands::Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        grid_n: cli.grid_n,
    };
    let outcome = match &cli.command {
        Command::Fracops => commands::fracops(cli.config.as_deref(), &overrides),
        Command::Metric => commands::metric(cli.config.as_deref(), &overrides),
        Command::Characteristics => commands::characteristics(cli.config.as_deref(), &overrides),
        Command::LyapunovCheck { alpha } => {
            commands::lyapunov_check(cli.config.as_deref(), *alpha, &overrides)
        }
        Command::Value => commands::value(cli.config.as_deref(), &overrides),
        Command::Stability => commands::stability(cli.config.as_deref(), &overrides),
        Command::Witness => commands::witness(cli.config.as_deref(), &overrides),
        Command::Verify { suite } => {
            commands::verify(cli.config.as_deref(), suite.as_deref(), &overrides)
        }
        Command::ListFixtures => commands::list_fixtures(&overrides),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
