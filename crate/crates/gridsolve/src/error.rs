//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Classification tag for [`Error`], used for exit-code mapping and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    DimensionMismatch,
    SingularPivot,
    NotSpd,
    Breakdown,
    MaxIterations,
    DescriptorMismatch,
    CollectiveMisuse,
    IoError,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular pivot encountered at column {col}")]
    SingularPivot { col: usize },

    #[error("matrix is not symmetric positive definite (pivot {col})")]
    NotSpd { col: usize },

    #[error("solver breakdown: {0}")]
    Breakdown(String),

    #[error("maximum iteration count {max_iters} reached")]
    MaxIterations { max_iters: usize },

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("collective misuse: {0}")]
    CollectiveMisuse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionMismatch(_) => ErrorKind::DimensionMismatch,
            Error::SingularPivot { .. } => ErrorKind::SingularPivot,
            Error::NotSpd { .. } => ErrorKind::NotSpd,
            Error::Breakdown(_) => ErrorKind::Breakdown,
            Error::MaxIterations { .. } => ErrorKind::MaxIterations,
            Error::DescriptorMismatch(_) => ErrorKind::DescriptorMismatch,
            Error::CollectiveMisuse(_) => ErrorKind::CollectiveMisuse,
            Error::Io(_) | Error::InvalidInput(_) => ErrorKind::IoError,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand used at kernel entry points.
pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimensionMismatch(msg.into()))
}
