// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("first design column must be the intercept (all ones); row {0} differs")]
    MissingIntercept(usize),
    #[error("series too short: {0}")]
    TooShort(String),
    #[error("invalid segment range ({start}, {end}] for T={t}")]
    InvalidRange { start: usize, end: usize, t: usize },
    #[error("singular cross-product matrix on segment ({start}, {end}]")]
    Singular { start: usize, end: usize },
    #[error("degenerate segment ({start}, {end}]: zero residual sum of squares")]
    Degenerate { start: usize, end: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("computation refused: {0}")]
    Refused(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
