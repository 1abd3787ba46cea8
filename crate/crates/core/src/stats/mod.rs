//! Desk-scale statistics behind the data-science command pack.

pub mod descriptive;
pub mod dist;
pub mod inference;
pub mod lexicon;
pub mod model;
pub mod random;
pub mod table;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("the data has zero variance")]
    ZeroVariance,
    #[error("log transform needs every value to be positive")]
    NonPositive,
    #[error("the sample is empty")]
    Empty,
    #[error("p-value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("the lexicon has no categories")]
    EmptyLexicon,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("no feature columns")]
    EmptyFeatures,
    #[error("cannot split {rows} rows into {folds} folds")]
    BadFolds { folds: i64, rows: usize },
    #[error("n must be at least 1, got {0}")]
    BadN(i64),
    #[error("group totals must be positive")]
    ZeroTotal,
    #[error("no column named '{0}'")]
    UnknownColumn(String),
    #[error("{0}")]
    TypeMismatch(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("header row is missing or has an empty column name")]
    EmptyHeader,
    #[error("the result is not a finite number")]
    NonFinite,
}

pub(crate) fn need(xs: &[f64], n: usize) -> Result<(), StatsError> {
    if xs.len() < n {
        Err(StatsError::TooFew { need: n, got: xs.len() })
    } else {
        Ok(())
    }
}
