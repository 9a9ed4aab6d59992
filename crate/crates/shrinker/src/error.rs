use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("field carries no potential")]
    MissingPotential,
    #[error("insufficient domain: {0}")]
    InsufficientDomain(String),
    #[error("no convergence after {} doublings (last sup-difference {:e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    Convergence { history: Vec<f64> },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("gauge conversion failed: {0}")]
    Gauge(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("test section support: {0}")]
    Support(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
