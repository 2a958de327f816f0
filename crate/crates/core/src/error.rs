use thiserror::Error;

/// Errors produced by the simulation and estimation kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid spin: {0}")]
    InvalidSpin(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("regular dynamics: Lyapunov exponent {0} is not positive")]
    NonPositiveLyapunov(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-positive data point at index {index}: ({x}, {y})")]
    NonPositiveData { index: usize, x: f64, y: f64 },

    #[error("series has no interior maximum")]
    NoInteriorMaximum,

    #[error("series tail has not converged (relative spread {spread:.3e})")]
    NotConverged { spread: f64 },

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:e} at t = {time:e}")]
    PositivityViolation { min_eigenvalue: f64, time: f64 },

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
