use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("entry count mismatch: header declares {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },

    #[error("line {line}, column {column}: invalid number `{token}` (token {index})")]
    InvalidToken {
        line: usize,
        column: usize,
        index: usize,
        token: String,
    },

    #[error("line {line}, column {column}: non-finite value `{token}` (token {index})")]
    NonFinite {
        line: usize,
        column: usize,
        index: usize,
        token: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("infeasible cosparsity: the {l} selected rows have rank {rank} = d = {d}, null space is trivial")]
    InfeasibleCosparsity { l: usize, rank: usize, d: usize },

    #[error("infinite weight at index {index}: smoothing is zero and the analysis coefficient vanishes")]
    InfiniteWeight { index: usize },

    #[error("linear solve failed: system is not positive definite (smallest eigenvalue estimate {min_eigenvalue:e})")]
    LinearSolve { min_eigenvalue: f64 },

    #[error("relative error undefined for a zero reference signal")]
    ZeroSignal,

    #[error("condition-number hypothesis violated: t = kappa^-q * rho^(1-q/2) - 1 = {t} <= 0")]
    ConditionNumberHypothesis { t: f64 },

    #[error("recovery bound inapplicable: C1 denominator {denominator} <= 0")]
    BoundInapplicable { denominator: f64 },

    #[error("no valid S_q: floor((rho1+1)/(rho1^(1/(2-q))+1)) is zero")]
    NoValidSq,

    #[error("combinatorial guard exceeded: p = {p}, l_min = {l_min} (need p <= 24 and p - l_min <= 8)")]
    CombinatorialGuard { p: usize, l_min: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("no results to write")]
    EmptyResults,

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LinearSolve { .. }
            | Error::InfiniteWeight { .. }
            | Error::ZeroSignal
            | Error::BoundInapplicable { .. } => 2,
            Error::InfeasibleCosparsity { .. }
            | Error::ConditionNumberHypothesis { .. }
            | Error::NoValidSq
            | Error::CombinatorialGuard { .. } => 3,
            _ => 1,
        }
    }
}
