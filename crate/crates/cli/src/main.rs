//! `stackcp`: command-line front end for the stacked contact process toolkit.
//!
//! Exit codes: 0 success, 1 property violation, 2 configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Violation(String),
}

impl From<stacked_contact::Error> for CliError {
    fn from(e: stacked_contact::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "stackcp", version, about = "Stacked contact process simulator and analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (flat object, snake_case keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary output file (raster, CSV or witness log); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one run; writes a P5 raster (d = 1) and prints a summary line.
    Simulate,
    /// Run a coupling over a batch of seeds and check its ordering.
    Couple {
        #[arg(value_enum)]
        which: CouplingKind,
    },
    /// Integrate the mean-field equations.
    Meanfield,
    /// Compare the gadget closed forms with Monte Carlo.
    Gadget,
    /// Host survival and infection persistence over a rate grid.
    Scan,
    /// Bisect for a critical rate.
    Critical,
    /// Oriented site percolation survival.
    Percolation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CouplingKind {
    Lemma1,
    Lemma2,
    Table2,
    Table3,
    Box,
    Fig4,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.reps {
        cfg.reps = r;
    }
    if let Some(h) = cli.horizon {
        cfg.horizon = h;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, out),
        Command::Couple { which } => commands::couple(&cfg, which, out),
        Command::Meanfield => commands::meanfield(&cfg, out),
        Command::Gadget => commands::gadget(&cfg, out),
        Command::Scan => commands::scan(&cfg, out),
        Command::Critical => commands::critical(&cfg, out),
        Command::Percolation => commands::percolation(&cfg, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
