//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Geometric configuration that leaves the requested quantity undefined,
    /// e.g. a translation direction parallel to the rotated bearing.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Iterative solve gave up without reaching its tolerance. The message
    /// carries the best energy seen so callers can decide what to salvage.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("robust fit failure: {0}")]
    RobustFitFailure(String),

    #[error("scene generation failure: {0}")]
    GenerationFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateGeometry(msg.into())
    }

    /// Short machine-readable code, used by the CLI for stderr diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::Parse { .. } => "parse-error",
            Error::Validation(_) => "validation-error",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::InsufficientData(_) => "insufficient-data",
            Error::NoConvergence(_) => "no-convergence",
            Error::RobustFitFailure(_) => "robust-fit-failure",
            Error::GenerationFailure(_) => "generation-failure",
            Error::Io(_) => "io-error",
        }
    }
}
