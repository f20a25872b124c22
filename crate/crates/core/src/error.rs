use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load {path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular design matrix; collinear columns: {}", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("undefined similarity: {0}")]
    UndefinedSimilarity(String),

    #[error("backend gave up after {attempts} attempts; last reply: {last_raw_text:?}")]
    RetriesExhausted {
        attempts: u32,
        last_raw_text: String,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("session log I/O failure (last durable offset {durable_offset}): {source}")]
    SessionLog {
        durable_offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn load(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: message.into(),
        }
    }
}
