use alloc::string::String;
use core::fmt;

use chrono::NaiveDate;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    EmptyDataset,
    /// Feature rows and labels disagree in length, or a row has the wrong width.
    Shape(String),
    NonFinite { row: usize, column: usize },
    DuplicateFeatureName(String),
    InvalidParam { name: &'static str, reason: String },
    EmptyCounts,
    DimensionMismatch { expected: usize, found: usize },
    InsufficientHistory { needed: usize, available: usize },
    InvalidBar { date: NaiveDate, reason: String },
    DuplicateDate(NaiveDate),
    NoPositionedDays,
    NonPositiveEquity,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDataset => write!(f, "empty dataset"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::NonFinite { row, column } => {
                write!(f, "non-finite feature value at row {row}, column {column}")
            }
            Error::DuplicateFeatureName(name) => write!(f, "duplicate feature name `{name}`"),
            Error::InvalidParam { name, reason } => write!(f, "invalid `{name}`: {reason}"),
            Error::EmptyCounts => write!(f, "impurity of an empty node is undefined"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} features, found {found}")
            }
            Error::InsufficientHistory { needed, available } => write!(
                f,
                "insufficient history: need at least {needed} bars, have {available}"
            ),
            Error::InvalidBar { date, reason } => write!(f, "invalid bar on {date}: {reason}"),
            Error::DuplicateDate(date) => write!(f, "duplicate bar date {date}"),
            Error::NoPositionedDays => write!(f, "no positioned days"),
            Error::NonPositiveEquity => write!(f, "equity must stay positive"),
        }
    }
}

impl core::error::Error for Error {}
