//! `epismc` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 when a
//! run fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod input;
mod output;

use commands::dist_check::DistCheckOpts;
use commands::identify::IdentifyOpts;
use commands::infer::InferOpts;
use commands::simulate::{MeasureOpts, SimulateOpts};
use commands::Context;
use config::{CommonOpts, ConfigFile, Layered, ScenarioOpts};
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "epismc", version, about = "Stochastic epidemic simulation, particle-filter inference and FROLS identification")]
struct Cli {
    /// TOML config: common keys at the top level, one section per command
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Stochastic ensemble and deterministic run of a compartment model
    Simulate {
        #[command(flatten, next_help_heading = "Scenario")]
        scenario: ScenarioOpts,
        #[command(flatten, next_help_heading = "Command")]
        opts: SimulateOpts,
    },
    /// Deterministic measurement series of one compartment
    GenerateMeasurements {
        #[command(flatten, next_help_heading = "Scenario")]
        scenario: ScenarioOpts,
        #[command(flatten, next_help_heading = "Command")]
        opts: MeasureOpts,
    },
    /// Particle-marginal Metropolis inference of model rates
    Infer {
        #[command(flatten, next_help_heading = "Scenario")]
        scenario: ScenarioOpts,
        #[command(flatten, next_help_heading = "Command")]
        opts: InferOpts,
    },
    /// Forward-regression orthogonal least squares term selection
    Identify {
        #[command(flatten, next_help_heading = "Command")]
        opts: IdentifyOpts,
    },
    /// Analytic against sampled moments of the count distributions
    DistCheck {
        #[command(flatten, next_help_heading = "Command")]
        opts: DistCheckOpts,
    },
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let common = cli.common.or(file.common()?);
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("threads: {e}")))?;
    }
    let out_dir = common.out_dir.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let ctx = Context { seed: common.seed.unwrap_or_default(), out_dir, file };
    match cli.command {
        Command::Simulate { scenario, opts } => commands::simulate::simulate(&ctx, scenario, opts),
        Command::GenerateMeasurements { scenario, opts } => {
            commands::simulate::generate_measurements(&ctx, scenario, opts)
        }
        Command::Infer { scenario, opts } => commands::infer::infer(&ctx, scenario, opts),
        Command::Identify { opts } => commands::identify::identify(&ctx, opts),
        Command::DistCheck { opts } => commands::dist_check::dist_check(&ctx, opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epismc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
