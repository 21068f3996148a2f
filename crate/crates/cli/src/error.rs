//! Errors carrying process exit codes: 2 usage/config, 3 data, 4
//! backend/transport, 5 numeric failure.

use tabflow_core::CoreError;
use tabflow_reasoner::ReasonerError;

#[derive(Debug)]
pub struct AppError {
    pub exit_code: i32,
    pub message: String,
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn config(message: String) -> Self {
        AppError {
            exit_code: 2,
            message,
        }
    }

    pub fn data(message: String) -> Self {
        AppError {
            exit_code: 3,
            message,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let exit_code = match &e {
            CoreError::Numeric(_) => 5,
            _ => 3,
        };
        AppError {
            exit_code,
            message: e.to_string(),
        }
    }
}

impl From<ReasonerError> for AppError {
    fn from(e: ReasonerError) -> Self {
        match e {
            ReasonerError::Core(core) => core.into(),
            other => AppError {
                exit_code: 4,
                message: other.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError {
            exit_code: 3,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError {
            exit_code: 3,
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
