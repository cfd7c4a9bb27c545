//! Command-line front end: CSV ingestion with quality filtering, covariate
//! construction, configuration files, detector snapshots, and the
//! `simulate` / `detect` / `estimate-priors` / `evaluate` / `sweep` /
//! `replay` subcommands.

pub mod config;
pub mod detect;
pub mod estimate;
pub mod evaluate;
pub mod events;
pub mod ingest;
pub mod simulate;
pub mod snapshot;
pub mod sweep;

use thiserror::Error;

/// Process-level error classes; each maps to a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: unknown flags, missing arguments. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Bad data or configuration: unreadable files, schema violations,
    /// invalid config values, snapshot mismatches. Exit code 2.
    #[error("{0}")]
    Data(String),
    /// Numerical failure inside the statistical kernels. Exit code 3.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<bocpd_core::Error> for CliError {
    fn from(e: bocpd_core::Error) -> Self {
        use bocpd_core::Error as E;
        match e {
            E::InvalidConfig { .. }
            | E::DimensionMismatch { .. }
            | E::InvalidSpec { .. }
            | E::TooFewObservations { .. }
            | E::TooFewSegments { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
