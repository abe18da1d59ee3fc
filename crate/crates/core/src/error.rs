use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    OutOfRange(String),

    #[error("ill-conditioned support")]
    IllConditioned,

    #[error("exponential cost guard: n = {0} exceeds 12")]
    ExponentialGuard(usize),

    #[error("zero-energy reference signal")]
    ZeroEnergy,

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dims(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }

    /// Process exit code for the command-line front end: 2 for malformed input or
    /// usage, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_)
            | Error::Config(_)
            | Error::Usage(_)
            | Error::DimensionMismatch { .. }
            | Error::EmptyInput => 2,
            _ => 1,
        }
    }
}
