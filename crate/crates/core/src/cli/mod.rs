//! `falsebottom simulate|validate|compare <cfg>` and `falsebottom benchmark`.
//!
//! Exit codes: 0 success, 1 config error, 2 solver failure, 3 failed check.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Exit;
use commands::Options;

#[derive(Debug, Parser)]
#[command(name = "falsebottom", version, about = "False-bottom ice layer solver")]
pub struct Cli {
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Seed for randomized checks; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Advance the integral-equation solver and write boundaries, snapshots and diagnostics.
    Simulate { config: PathBuf },
    /// Run residual, kernel, quadrature and benchmark checks.
    Validate { config: PathBuf },
    /// Cross-check against the finite-difference solver.
    Compare { config: PathBuf },
    /// One-phase Stefan convergence suite.
    Benchmark,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Config } else { Exit::Ok };
            let _ = e.print();
            return code as i32;
        }
    };
    let opts = Options { out: cli.out, quiet: cli.quiet, seed: cli.seed };
    let exit = match &cli.command {
        Command::Simulate { config } => commands::simulate(config, &opts),
        Command::Validate { config } => commands::validate(config, &opts),
        Command::Compare { config } => commands::compare(config, &opts),
        Command::Benchmark => commands::benchmark(&opts),
    };
    exit as i32
}
