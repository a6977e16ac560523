use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("schema: missing required column `{0}`")]
    MissingColumn(String),

    #[error("parse: row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("data: row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("date: {0}")]
    InvalidDate(String),

    #[error("config: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("encoding: unseen category `{value}` in column `{column}` at row {row}")]
    UnseenCategory {
        column: String,
        value: String,
        row: usize,
    },

    #[error("prediction: {0}")]
    Prediction(String),

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing artifact `{}`", .0.display())]
    MissingArtifact(PathBuf),

    #[error("step `{step}`: {source}")]
    Step {
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            row,
            column: column.into(),
            message: message.into(),
        }
    }

    pub fn in_step(self, step: &str) -> Self {
        Error::Step {
            step: step.to_string(),
            source: Box::new(self),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Usage(_) => ErrorClass::Usage,
            Error::Degenerate(_) | Error::Numeric(_) | Error::Prediction(_) => ErrorClass::Numeric,
            Error::Step { source, .. } | Error::File { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}
