use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: action has {action} coordinates, state has {state}")]
    DimensionMismatch { action: usize, state: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid score: {0}")]
    InvalidScore(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state space has {n} states; exhaustive enumeration is limited to {limit}")]
    EnumerationLimit { n: usize, limit: usize },

    #[error("max_k = {max_k} is out of range; need 2 <= max_k <= {n} (number of states)")]
    MaxKRange { max_k: usize, n: usize },

    #[error("closed-form 2x2 analysis requires phi = 1, got {phi}")]
    PhiNotOne { phi: f64 },

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("cell {index} carries probability mass {mass:e}, below the 1e-15 floor")]
    VoidCell { index: usize, mass: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
