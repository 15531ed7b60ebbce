use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("periods {0} and {1} divide one another; hidden periods must be pairwise non-divisible")]
    DivisibilityViolation(u64, u64),

    #[error("invalid period set: {0}")]
    InvalidPeriods(String),

    #[error("dictionary columns are not unit-norm; normalize the dictionary first")]
    NotNormalized,

    #[error("sparsity level k = {k} exceeds N - 1 = {max}")]
    KTooLarge { k: usize, max: usize },

    #[error("no admissible period set for k = {k}, m = {m}")]
    EmptyQkm { k: usize, m: usize },

    #[error("sparsity s = {s} outside 1..={k}")]
    SOutOfRange { s: usize, k: usize },

    #[error("Gram matrix is numerically singular (condition number {cond:.3e}){}", periods_suffix(.periods))]
    SingularGram { cond: f64, periods: Option<Vec<u64>> },

    #[error("condition {0} does not hold; the coefficient threshold is undefined")]
    ConditionNotMet(String),

    #[error("basis pursuit did not converge after {iterations} iterations (feasibility gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("invalid stop rule: {0}")]
    InvalidStopRule(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: malformed dictionary file: {msg}")]
    MalformedFile { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn periods_suffix(periods: &Option<Vec<u64>>) -> String {
    match periods {
        Some(p) => format!(" for T = {p:?}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
