//! Batch front end for the cell modeling library: generate plant data, fit
//! model families, validate predictions, estimate charge, and sweep network
//! sizes, all driven by a flat config file plus command-line overrides.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod config;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] celldyn::Error),
}

/// Stable exit codes, one per error contract.
fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Config(_) => 2,
        CliError::Lib(e) => match e {
            celldyn::Error::Io { .. } | celldyn::Error::Parse { .. } => 3,
            celldyn::Error::RankDeficient { .. } => 4,
            celldyn::Error::CovarianceBlowup { .. } => 5,
            celldyn::Error::EmptyBin { .. } => 6,
            celldyn::Error::FamilyMismatch { .. } => 7,
            _ => 1,
        },
    }
}

#[derive(Parser)]
#[command(
    name = "celldyn",
    version,
    about = "Battery cell modeling, identification, and charge estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (flat key = value with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the generator seed (simulate.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created on demand.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Single-key override, section.key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test profile, replay the reference cell, write the record.
    Simulate,
    /// Fit one model family to a record.
    Fit,
    /// Score a fitted model's predictions against a record.
    Validate,
    /// Run the closed-loop charge estimator over a record.
    Soc,
    /// Fit and validate the network family across kernel counts.
    SweepKernels,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let file_text = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            CliError::Lib(celldyn::Error::Io {
                path: path.display().to_string(),
                source: e,
            })
        })?),
        None => None,
    };
    let cfg = RunConfig::resolve(file_text.as_deref(), &cli.set, cli.seed)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| {
        CliError::Lib(celldyn::Error::Io {
            path: cli.out.display().to_string(),
            source: e,
        })
    })?;
    let config_sha = cfg.echo(&cli.out)?;
    match cli.command {
        Command::Simulate => cmd::simulate::run(&cfg, &cli.out),
        Command::Fit => cmd::fit::run(&cfg, &cli.out, &config_sha),
        Command::Validate => cmd::validate::run(&cfg, &cli.out, &config_sha),
        Command::Soc => cmd::soc::run(&cfg, &cli.out, &config_sha),
        Command::SweepKernels => cmd::sweep::run(&cfg, &cli.out, &config_sha),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
