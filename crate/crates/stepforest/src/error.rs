use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: label cardinality {count} (tokens: {tokens})", path.display())]
    LabelCardinality {
        path: PathBuf,
        count: usize,
        tokens: String,
    },
    #[error("{}: label token `{token}` on line {line} is neither `{positive}` nor `{negative}`", path.display())]
    UnknownLabel {
        path: PathBuf,
        line: u64,
        token: String,
        positive: String,
        negative: String,
    },
    #[error("{}: line {line}, column `{column}`: `{value}` is not a finite number", path.display())]
    NonNumeric {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{}: line {line}: bad date `{value}` (expected YYYY-MM-DD)", path.display())]
    BadDate {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{}: empty dataset", path.display())]
    Empty { path: PathBuf },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{}: unsupported model format `{found}`", path.display())]
    ModelFormat { path: PathBuf, found: String },
    #[error("{}: expected {expected} data rows after writing, found {found}", path.display())]
    Verify {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Core(#[from] stepforest_core::Error),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
