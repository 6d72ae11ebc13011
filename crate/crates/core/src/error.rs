//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// Vector/matrix dimensions are inconsistent.
    DimensionMismatch(String),
    /// Integration produced a non-finite value at the named time step.
    Divergence { step: usize },
    /// Training loss became non-finite during the named epoch.
    TrainDivergence { epoch: usize },
    /// An operation that needs data received an empty collection.
    EmptyInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::Divergence { step } => {
                write!(f, "integration diverged: non-finite value at time step {step}")
            }
            Error::TrainDivergence { epoch } => {
                write!(f, "training diverged: non-finite loss in epoch {epoch}")
            }
            Error::EmptyInput(msg) => write!(f, "empty input: {msg}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
