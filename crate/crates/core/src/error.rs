use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    CellParse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("column '{column}' has kind {actual}, expected {expected}")]
    KindMismatch {
        column: String,
        expected: String,
        actual: String,
    },

    #[error("missing cell at row {row}, column '{column}'")]
    MissingCell { row: usize, column: String },

    #[error("division by zero while evaluating '{0}'")]
    DivisionByZero(String),

    #[error("formula syntax error at byte {offset}: {message}")]
    FormulaSyntax { offset: usize, message: String },

    #[error("invalid relationship spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("out-of-vocabulary value '{token}' in column '{column}'")]
    OutOfVocabulary { column: String, token: String },

    #[error("decompression error: {0}")]
    Decompression(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
