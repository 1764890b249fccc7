//! `ppwave`: curvature reports, TCC checks, surface analysis, identity
//! verification and maximal/CMC solves for Brinkmann pp-wave metrics.
//!
//! Exit status: 0 success, 1 identity failure, 2 solver failure (including
//! a non-spacelike initial guess), 3 configuration or usage error.

mod commands;
mod config;
mod error;
mod oracle;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{DefaultStep, Run};
use error::CliError;

#[derive(Parser)]
#[command(name = "ppwave", version, about = "Geometry of pp-wave spacetimes and their spacelike hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Christoffel symbols and Ricci tensor on a sample grid, with oracle deltas.
    Curvature(Common),
    /// Timelike convergence condition on a sample grid.
    Tcc(Common),
    /// Per-point extrinsic geometry of the configured surface (CSV).
    Analyze(Common),
    /// Identity suite on the configured surface.
    Verify(Common),
    /// Maximal or constant-mean-curvature graph solve.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads.
    #[arg(long, env = "PPWAVE_THREADS", default_value_t = 1)]
    threads: usize,
    /// Finite-difference step, overriding `[grid] h`.
    #[arg(long = "h", value_name = "STEP")]
    h: Option<f64>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Step for the curvature oracles when none is configured.
const ORACLE_STEP: f64 = 1e-4;

fn run(command: &Command) -> Result<Vec<PathBuf>, CliError> {
    let (common, step) = match command {
        Command::Curvature(c) => (c, DefaultStep::Fixed(ORACLE_STEP)),
        Command::Tcc(c) | Command::Analyze(c) | Command::Verify(c) | Command::Solve(c) => (c, DefaultStep::Relative),
    };
    if common.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", common.config.display())))?;
    let run = Run::load(&text, common.h, common.out.clone(), step)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Curvature(_) => commands::curvature(&run),
        Command::Tcc(_) => commands::tcc(&run),
        Command::Analyze(_) => commands::analyze(&run),
        Command::Verify(_) => commands::verify(&run),
        Command::Solve(_) => commands::solve(&run),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ppwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
