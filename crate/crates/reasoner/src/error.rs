use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("auth token env var '{0}' is not set")]
    MissingToken(String),

    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },

    #[error("backend returned status {status}: {body}")]
    BadStatus { status: u16, body: String },

    #[error("backend reply is not a relationship spec: {0}")]
    BadResponse(String),

    #[error("rule file error: {0}")]
    RuleFile(String),

    #[error(transparent)]
    Core(#[from] tabflow_core::CoreError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReasonerError>;
