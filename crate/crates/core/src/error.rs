use thiserror::Error;

/// Errors raised by dataset construction, oracles and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A LibSVM line could not be parsed. Line numbers are 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid label {label}: {reason}")]
    InvalidLabel { label: f64, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    /// The iterate stopped being finite; usually the step size is too large.
    #[error("non-finite iterate after {steps} steps")]
    Diverged { steps: u64 },

    /// The configured gradient-norm tolerance was not met within the epoch cap.
    #[error("gradient norm {grad_norm:e} still above {tolerance:e} after {epochs} epochs")]
    StoppingNotReached {
        epochs: usize,
        grad_norm: f64,
        tolerance: f64,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
