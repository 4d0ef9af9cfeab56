// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no strongly connected graph after {attempts} attempts (n = {n}, p = {p})")]
    ConnectivityExhausted { n: usize, p: f64, attempts: usize },

    #[error(
        "likelihood draw for agent {agent}, hypothesis {hypothesis} rejected {attempts} times"
    )]
    RejectionExhausted {
        agent: usize,
        hypothesis: usize,
        attempts: usize,
    },

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("learner window holds {have} matrices, needs {need}")]
    InsufficientWindow { have: usize, need: usize },

    #[error("singular moment matrix")]
    SingularMoments,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
