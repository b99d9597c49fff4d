use thiserror::Error;

use crate::policy::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("agent {agent}: strategy index {index} out of range (agent has {size} strategies)")]
    StrategyOutOfRange {
        agent: usize,
        index: usize,
        size: usize,
    },

    #[error("agent index {agent} out of range for a {players}-player game")]
    AgentOutOfRange { agent: usize, players: usize },

    #[error("profile index {index} out of range (game has {size} profiles)")]
    ProfileOutOfRange { index: usize, size: usize },

    #[error("unknown {what} `{label}`")]
    UnknownLabel { what: &'static str, label: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid policy:\n{0}")]
    InvalidPolicy(ValidationReport),

    #[error("invalid agenda weights: {0}")]
    InvalidWeights(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("not a cyclic 2x2 game: {0}")]
    NotCyclic(String),

    #[error("rho0 too large: {rho0} gives a transition probability outside (0,1); rho0 must be below {max}")]
    RhoTooLarge { rho0: f64, max: f64 },

    #[error("singular linear system while solving {what} for class {class:?}")]
    Singular {
        what: &'static str,
        class: Vec<usize>,
    },

    #[error("dense solve of size {size} exceeds the limit of {limit} states")]
    TooLarge { size: usize, limit: usize },

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
