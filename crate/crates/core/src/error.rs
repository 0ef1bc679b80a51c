use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix data has {found} entries, expected {expected}")]
    EntryCount { expected: usize, found: usize },

    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exact enumeration needs {needed} outcome combinations, cap is {cap}")]
    CapExceeded { needed: u128, cap: u64 },

    #[error("model is not centered; apply `center` first")]
    NotCentered,

    #[error("no closed form available: {0}")]
    NoClosedForm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
