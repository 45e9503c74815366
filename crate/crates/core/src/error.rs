use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// A malformed input record; `row` is the 1-based data row (header excluded).
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("empty sensitive group: {0}")]
    EmptyGroup(String),

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("learner: {0}")]
    Learner(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad inputs (files, schemas, specs, arguments)
    /// rather than by a failing computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Row { .. }
            | Error::Schema(_)
            | Error::InvalidSpec(_)
            | Error::ColumnMismatch(_)
            | Error::InvalidArgument(_) => true,
            Error::EmptyGroup(_) | Error::Learner(_) => false,
            Error::Context { source, .. } => source.is_input_error(),
        }
    }
}
