use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("discount factor must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),

    #[error("invalid horizon model: {0}")]
    InvalidHorizon(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("logits for state {state} are not finite")]
    NonFiniteLogits { state: &'static str },

    #[error("training batch is empty")]
    EmptyBatch,

    #[error("curriculum has no stages")]
    EmptyCurriculum,

    #[error("payoff matrix is not a prisoner's dilemma: {0}")]
    NotPrisonersDilemma(String),

    #[error("expected {expected} actions, got {got}")]
    ActionCountMismatch { expected: usize, got: usize },

    #[error("episode already finished at step {0}")]
    EpisodeFinished(usize),

    #[error("degenerate {index} reference: hi {hi} must exceed lo {lo}")]
    DegenerateReference { index: &'static str, lo: f64, hi: f64 },

    #[error("coalition audit: {0}")]
    Coalition(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema mismatch in {path}: {detail}")]
    Schema { path: PathBuf, detail: String },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
