use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid channel realization: {0}")]
    InvalidChannels(String),

    #[error("operation needs at least {need} nodes, got {got}")]
    TooFewNodes { need: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible slot vector: sum of information slots is {sum}, must not exceed 1")]
    InfeasibleSlots { sum: f64 },

    #[error("no node has a positive secrecy rate after blinding")]
    NoActiveNodes,

    #[error("max-min fairness is infeasible: node {node} has a non-positive secrecy slope")]
    MmfInfeasible { node: usize },

    #[error("slot duration of active node {node} is at the zero boundary")]
    BoundarySlot { node: usize },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { context: path.into(), source }
    }
}
