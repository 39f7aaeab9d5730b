use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Which side of a year split came out empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSide {
    Train,
    Test,
}

impl fmt::Display for SplitSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitSide::Train => "train",
            SplitSide::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate record for ({city}, {year})")]
    DuplicateKey { city: String, year: i32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("split at last training year {last_train_year} leaves the {side} set empty")]
    EmptySplit {
        side: SplitSide,
        last_train_year: i32,
    },

    #[error("column `{column}` has zero variance")]
    DegenerateColumn { column: String },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("unknown city `{0}`")]
    UnknownCity(String),

    #[error("layout mismatch: expected {expected} columns, got {found}")]
    Layout { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("design is rank deficient: column `{column}` is linearly dependent on earlier columns")]
    Singular { column: String },

    #[error("underdetermined system: {rows} rows for {columns} columns")]
    Underdetermined { rows: usize, columns: usize },

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("model produced a non-finite forecast for year {year}")]
    NonFinite { year: i32 },
}
