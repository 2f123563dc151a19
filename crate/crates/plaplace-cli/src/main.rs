//! `plaplace`: command-line front end for the toolkit.
//!
//! Exit codes: 0 success, 1 computation failure (route disagreement,
//! ratio below 1, solver non-convergence), 2 malformed input (CLI
//! usage, unreadable or invalid JSON configs, out-of-range parameters).

mod cmd;
mod out;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A failure with its exit code already decided.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 1 }
    }
}

/// Parameter validation errors are the caller's input; everything else
/// that bubbles out of the library is a computation failure.
pub fn input_err(e: plaplace::Error) -> CliError {
    match e {
        plaplace::Error::Domain(_) | plaplace::Error::EmptyRegion(_) => {
            CliError::usage(e.to_string())
        }
        other => CliError::failure(other.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "plaplace", version, about = "Dirichlet spectrum toolkit for the normalized p-Laplacian", max_term_width = 100)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Directory for reports, tables, plots, and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Seed for solver start vectors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// First eigenvalue of the ball by both routes, with their gap.
    Ball(cmd::BallArgs),
    /// Constants K, K*, and their ratio over a p grid (CSV + SVG).
    Constants(cmd::ConstantsArgs),
    /// Solve one domain and optionally verify bounds, simplicity,
    /// symmetry, and the Hopf quotient (JSON report + field CSV).
    Solve(cmd::SolveArgs),
    /// Pointwise chain checks behind the measure lower bound.
    Abp(cmd::AbpArgs),
    /// Rank shapes by lambda times measure at fixed p.
    FaberKrahn(cmd::FaberKrahnArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ball(args) => cmd::ball(&cli.global, &args),
        Command::Constants(args) => cmd::constants(&cli.global, &args),
        Command::Solve(args) => cmd::solve(&cli.global, &args),
        Command::Abp(args) => cmd::abp(&cli.global, &args),
        Command::FaberKrahn(args) => cmd::faber_krahn(&cli.global, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
