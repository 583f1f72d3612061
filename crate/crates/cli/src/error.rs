use csh_core::CshError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{} check(s) failed: {}", .0.len(), .0.join("; "))]
    Assertion(Vec<String>),

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error(transparent)]
    Core(#[from] CshError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 when a checked invariant is violated, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 2,
            CliError::Core(
                CshError::GaugeViolation { .. }
                | CshError::ConstraintViolation { .. }
                | CshError::BlowUp { .. }
                | CshError::DataTooLarge { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
