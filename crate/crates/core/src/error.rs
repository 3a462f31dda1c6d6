use thiserror::Error;

use crate::config::IndexId;

/// Errors raised by the tuning engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("unknown index id {0}")]
    UnknownIndex(IndexId),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration limit exceeded: {size} indices relevant, cap is {cap}")]
    EnumerationLimit { size: usize, cap: usize },

    #[error("capacity exceeded: {size} candidates, cap is {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("vote sets overlap on {0:?}")]
    OverlappingVotes(Vec<IndexId>),

    #[error("new partition does not cover materialized indices {0:?}")]
    Coverage(Vec<IndexId>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cost oracle failure: {0}")]
    Oracle(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for TuneError {
    fn from(e: std::io::Error) -> Self {
        TuneError::Io(e.to_string())
    }
}

impl From<csv::Error> for TuneError {
    fn from(e: csv::Error) -> Self {
        TuneError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for TuneError {
    fn from(e: serde_json::Error) -> Self {
        TuneError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TuneError>;
