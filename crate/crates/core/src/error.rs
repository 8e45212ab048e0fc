use thiserror::Error;

/// Errors raised by the solvers and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("model minimum is unbounded over the feasible set")]
    Unbounded,

    #[error("backtracking failed: L = {lipschitz:e} exceeded ceiling {ceiling:e} at iteration {iteration}")]
    LipschitzCeiling {
        lipschitz: f64,
        ceiling: f64,
        iteration: usize,
    },

    #[error("inner solver failed: {0}")]
    InnerSolver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
