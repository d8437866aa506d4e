//! Command-line front end: config ingestion, orchestration, report files and
//! the exit-code contract (0 pass, 1 a check failed, 2 configuration or I/O).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{read_transport_csv, RunSummary, TransportRow};
pub use config::{Experiment, ExperimentConfig, OUTPUT_DIR_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Compute(#[from] crate::error::Error),
}

impl CliError {
    /// A non-monotone map is a failed check; every other error is an
    /// environment or configuration problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(crate::error::Error::NotMonotone { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hft", version, about = "Heat-flow transport maps on one-dimensional model spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the Γ recursion against closed forms and certify curvature.
    GammaCheck {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Compute the transport map on the configured grid.
    Transport {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run every verification report.
    VerifyAll {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Print the Lipschitz bound for the given curvature and potential constant.
    Bounds {
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        rho2: f64,
        #[arg(long = "K")]
        k: f64,
    },
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GammaCheck { config } => commands::gamma_check(&load(&config)?),
        Command::Transport { config } => commands::transport(&load(&config)?),
        Command::VerifyAll { config } => commands::verify_all(&load(&config)?),
        Command::Bounds { rho1, rho2, k } => {
            let b = crate::transport::theorem_bound(rho1, rho2, k).map_err(|e| CliError::Config(e.to_string()))?;
            use std::io::Write as _;
            let _ = writeln!(std::io::stdout(), "{b}");
            Ok(true)
        }
    }
}

fn load(path: &std::path::Path) -> Result<Experiment> {
    let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    ExperimentConfig::load(path)?.validate(&base)
}

/// Parse `args` (including the program name) and run. Never panics.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(true)) => 0,
        Ok(Ok(false)) => 1,
        Ok(Err(e)) => {
            eprintln!("hft: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("hft: internal error");
            2
        }
    }
}
