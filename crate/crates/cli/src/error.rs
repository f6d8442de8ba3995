use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] vlasov_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const BLOW_UP: i32 = 2;
    pub const INVALID: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use vlasov_core::Error as E;
        match self {
            CliError::Config(_) => exit::INVALID,
            CliError::Core(E::InvalidInput(_) | E::Validation(_) | E::Format(_)) => exit::INVALID,
            CliError::Core(E::BlowUp { .. }) => exit::BLOW_UP,
            _ => exit::CHECK_FAILED,
        }
    }
}
