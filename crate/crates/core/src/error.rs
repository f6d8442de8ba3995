use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kernel evaluated at its singularity (x = 0)")]
    Singularity,

    #[error("phase point outside the tabulated domain: {0}")]
    OutOfDomain(String),

    #[error("blow-up at t = {time}: |v| = {speed:e} exceeds guard {guard:e}")]
    BlowUp { time: f64, speed: f64, guard: f64 },

    #[error("numerical failure at step {step}: {what}")]
    NumericalFailure { step: usize, what: String },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
