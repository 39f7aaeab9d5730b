use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("cannot read {}: {source}", path.display())]
    Input { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },

    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("row {row}, column {column}: cannot parse `{value}` as {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row}: duplicate key ({city}, {year})")]
    DuplicateKey { row: usize, city: String, year: i32 },

    /// A JSON document that does not match its schema; `field` is the path
    /// to the offending entry.
    #[error("{}: {field}: {message}", path.display())]
    Schema { path: PathBuf, field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Model(#[from] stirpat_core::Error),

    #[error("{0}")]
    Failed(String),
}

impl LabError {
    /// 1 for runtime and model errors, 2 for usage and format errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Output { .. } | LabError::Failed(_) => 1,
            LabError::Model(stirpat_core::Error::Scenario(_)) => 2,
            LabError::Model(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
