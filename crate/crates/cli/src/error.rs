//! CLI error type with stable exit codes.

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit code 2). The message names
    /// the offending field where possible.
    #[error("config error: {0}")]
    Config(String),

    /// Numeric divergence during integration or training (exit code 3).
    #[error("numeric divergence: {0}")]
    Divergence(String),

    /// A bound check failed under `evaluate --strict` (exit code 4).
    #[error("bound check failed: {0}")]
    BoundCheck(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Core(kkl_core::Error),
}

impl From<kkl_core::Error> for CliError {
    fn from(e: kkl_core::Error) -> Self {
        match e {
            kkl_core::Error::Divergence { .. } | kkl_core::Error::TrainDivergence { .. } => {
                CliError::Divergence(e.to_string())
            }
            kkl_core::Error::InvalidArgument(_)
            | kkl_core::Error::DimensionMismatch(_)
            | kkl_core::Error::EmptyInput(_) => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Divergence(_) => ExitCode::from(3),
            CliError::BoundCheck(_) => ExitCode::from(4),
            _ => ExitCode::from(1),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
