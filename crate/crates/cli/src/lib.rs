//! Command implementations behind the `nonneg` binary.
//!
//! Every command writes deterministic artifacts: images follow the 8-bit
//! quantization of `nonneg_core::image`, CSV numbers use the shortest
//! round-trip representation, and `report.json` differs between identical
//! invocations only in `runtime_ms`.

pub mod args;
mod commands;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use args::Cli;
pub use commands::{
    cmd_batch, cmd_landscape, cmd_run, cmd_sweep, execute, Aggregate, LandscapeArgmin,
    LandscapeInputs, LandscapeReport, Summary, SweepRow, VariantAggregate,
};

/// Environment variable capping batch and sweep parallelism.
pub const THREADS_ENV: &str = "NONNEG_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] nonneg_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unmatched files: {}", .0.join(", "))]
    Unmatched(Vec<String>),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 bad flags, 3 dimension mismatch or unmatched pair, 4 I/O failure.
    pub fn exit_code(&self) -> i32 {
        use nonneg_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::InvalidParameter(_) | E::UnsupportedVariant(_)) => 2,
            CliError::Core(E::DimensionMismatch { .. }) => 3,
            CliError::Unmatched(_) => 3,
            CliError::Core(E::Read { .. } | E::Write { .. } | E::UnsupportedFormat { .. }) => 4,
            CliError::Io { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
