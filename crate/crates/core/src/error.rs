use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum CshError {
    #[error("invalid matrix dimension n = {0} (need n >= 2)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Lorenz gauge precondition violated: relative residual {residual:.3e}")]
    GaugeViolation { residual: f64 },

    #[error("constraint violated: residual {residual:.3e} exceeds {tolerance:.3e}")]
    ConstraintViolation { residual: f64, tolerance: f64 },

    #[error("data too large for the contraction gate: H^1 norm {norm:.3e} > {bound:.3e}")]
    DataTooLarge { norm: f64, bound: f64 },

    #[error("non-finite values encountered at t = {t}")]
    BlowUp { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CshError>;
