use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("under-resolved: {0}")]
    Resolution(String),

    #[error("infeasible packing: {0}")]
    Packing(String),

    #[error("CFL condition violated: number {cfl:.3} exceeds 0.5")]
    Cfl { cfl: f64 },

    #[error("solver produced non-finite values at t = {t}")]
    NonFinite { t: f64 },

    #[error("pressure unavailable: {0}")]
    MissingPressure(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
