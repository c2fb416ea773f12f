use thiserror::Error;

use crate::graph::GraphError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{what} = {value} out of range {lo}..={hi}")]
    Range {
        what: &'static str,
        value: u64,
        lo: u64,
        hi: u64,
    },
    #[error("sample draw {j} exceeds budget {budget}")]
    Budget { j: u64, budget: u64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("parameter overflow: {0}")]
    Overflow(String),
    #[error("malformed seed: {0}")]
    Seed(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("partition invariant violated: {0}")]
    Validation(String),
    #[error("malformed decision tree: {0}")]
    Tree(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
