//! `tfl`: command-line front end for the tempered fractional Laplacian
//! schemes.
//!
//! Exit status is 0 on success, 1 on a numerical failure (a solve that does
//! not converge, a failed rung, a broken table invariant) and 2 on a
//! configuration error.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tfl_core::TflError;

use config::Flags;

#[derive(Debug, Parser)]
#[command(name = "tfl", version, about = "High-order schemes for the tempered fractional Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample ψ_h, the continuous symbol and the discrete symbol along ξ₁.
    Symbols {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, default_value_t = 257)]
        samples: usize,
    },
    /// Compute the generator tensor; optionally an e(N_f) ladder.
    Coeffs {
        #[command(flatten)]
        flags: Flags,
        /// Number of e(N_f) rows to add, starting at --ladder-start.
        #[arg(long, default_value_t = 0)]
        ladder: usize,
        #[arg(long, default_value_t = 64)]
        ladder_start: usize,
    },
    /// Apply the operator to a grid-function CSV.
    Apply {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, value_name = "CSV")]
        input: std::path::PathBuf,
        /// Write the residual `f - A u` for this right-hand side instead.
        #[arg(long, value_name = "CSV")]
        rhs: Option<std::path::PathBuf>,
    },
    /// Solve `A u = f` by preconditioned conjugate gradients.
    Solve {
        #[command(flatten)]
        flags: Flags,
        /// Right-hand side: a grid-function CSV. Without it the source is
        /// manufactured from --problem.
        #[arg(long)]
        source: Option<String>,
        /// Step on which the manufactured source is computed (default h).
        #[arg(long)]
        reference_h: Option<f64>,
    },
    /// Run a convergence ladder.
    Convergence {
        #[command(flatten)]
        flags: Flags,
        /// coefficients, operator, solve or exact.
        #[arg(long)]
        study: Option<String>,
        /// Steps, finest last (N_f values for `coefficients`).
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
        /// linf, l2 or l2_nonmesh.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        reference_h: Option<f64>,
        #[arg(long, default_value = "convergence")]
        id: String,
    },
    /// Regenerate a reference table or figure (table1..table11, fig1..fig7).
    Reproduce {
        id: String,
        #[command(flatten)]
        flags: Flags,
        /// Lift the desk-scale cap on two-dimensional ladders.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<TflError> for CliError {
    fn from(e: TflError) -> Self {
        match e {
            TflError::NotConverged(_)
            | TflError::Breakdown { .. }
            | TflError::ImaginaryResidue { .. }
            | TflError::Io(_)
            | TflError::Json(_) => Self::Numerical(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Numerical(_) => 1,
            Self::Config(_) => 2,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var("TFL_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TFL_THREADS: expected a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("TFL_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Symbols { flags, samples } => commands::symbols(&flags, samples),
        Command::Coeffs {
            flags,
            ladder,
            ladder_start,
        } => commands::coeffs(&flags, ladder, ladder_start),
        Command::Apply { flags, input, rhs } => commands::apply(&flags, &input, rhs.as_deref()),
        Command::Solve {
            flags,
            source,
            reference_h,
        } => commands::solve(&flags, source, reference_h),
        Command::Convergence {
            flags,
            study,
            schedule,
            metric,
            reference_h,
            id,
        } => commands::convergence(&flags, commands::LadderArgs {
            study,
            schedule,
            metric,
            reference_h,
            id,
        }),
        Command::Reproduce { id, flags, full } => commands::reproduce(&id, &flags, full),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tfl: {e}");
            ExitCode::from(e.code())
        }
    }
}
