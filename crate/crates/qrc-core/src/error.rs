use thiserror::Error;

#[derive(Debug, Error)]
pub enum QrcError {
    #[error("site index {site} out of range for {n_spins} spins")]
    SiteOutOfRange { site: usize, n_spins: usize },
    #[error("operator is not Hermitian (max deviation {max_dev:.3e})")]
    NotHermitian { max_dev: f64 },
    #[error("state violates {what}: {detail}")]
    InvalidState { what: &'static str, detail: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("input value {value} outside [0, 1]")]
    InputOutOfRange { value: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("measurement strength g = {0} is invalid here: {1}")]
    InvalidStrength(f64, &'static str),
    #[error("time series error: {0}")]
    Series(String),
    #[error("readout is ill-posed: {0}")]
    IllPosed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QrcError>;
