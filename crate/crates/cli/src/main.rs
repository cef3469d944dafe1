//! `subtaylor` batch driver: one subcommand per experiment, JSON configs,
//! CSV or JSON reports. Exit codes: 0 success, 2 statistical failure,
//! 3 invariant or configuration failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Status;
use crate::config::{Format, Resolved, RunConfig};

#[derive(Parser)]
#[command(name = "subtaylor", version, about = "Taylor isometry experiments on complex Heisenberg-like groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed; the SUBTAYLOR_SEED environment variable takes precedence
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (defaults to standard output)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exact Fock norms against Monte Carlo heat-kernel norms
    Isometry,
    /// Taylor coefficient distances and restricted norms across projections
    Projection,
    /// Fejér truncation residuals and quadrature cross-check
    Fejer,
    /// Distance brackets and optimized horizontal paths
    Geometry,
    /// Exponential moment diagnostic
    Fernique,
    /// Mean of holomorphic polynomials along the Brownian motion
    Martingale,
    /// Quick end-to-end sanity checks
    Selftest,
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (cfg, base_dir) = match &cli.config {
        Some(path) => {
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            (RunConfig::load(path)?, dir)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    let resolved = Resolved::new(cfg, base_dir, cli.seed, cli.out, cli.format)?;
    match cli.command {
        Command::Isometry => commands::isometry(&resolved),
        Command::Projection => commands::projection(&resolved),
        Command::Fejer => commands::fejer(&resolved),
        Command::Geometry => commands::geometry(&resolved),
        Command::Fernique => commands::fernique(&resolved),
        Command::Martingale => commands::martingale(&resolved),
        Command::Selftest => commands::selftest(&resolved),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Status::Invariant as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Invariant as u8)
        }
    }
}
