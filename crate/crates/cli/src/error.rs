use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spec line {line}: {message}")]
    Spec { line: usize, message: String },

    #[error("invalid spec: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] hsdmpg_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories, reported as process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage = 2,
    Data = 3,
    Numerical = 4,
    Output = 5,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        use hsdmpg_core::Error as E;
        match self {
            Error::Spec { .. } | Error::Invalid(_) => Category::Usage,
            Error::Io { .. } | Error::Csv(_) => Category::Output,
            Error::Core(e) => match e {
                E::Io(_)
                | E::Parse { .. }
                | E::DimensionMismatch { .. }
                | E::InvalidLabel { .. }
                | E::EmptyIndexSet
                | E::IndexOutOfRange { .. } => Category::Data,
                E::InvalidArgument(_) => Category::Usage,
                E::Diverged { .. } | E::StoppingNotReached { .. } | E::Linalg(_) => {
                    Category::Numerical
                }
            },
        }
    }
}
