use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "loss became non-finite at iteration {iteration}; the learning rate is likely too large"
    )]
    NonFiniteLoss { iteration: usize },

    #[error("variant `{0}` is not handled by the optimizer")]
    UnsupportedVariant(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
