use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("input contains no samples")]
    Empty,

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate process: zero variance")]
    DegenerateProcess,

    #[error("insufficient pairs at lag {lag}: {pairs} < {min}")]
    InsufficientPairs {
        lag: usize,
        pairs: usize,
        min: usize,
    },

    #[error("lag {tau} s is not on the sample grid of {interval} s")]
    OffGrid { tau: f64, interval: f64 },

    #[error("degenerate moments: determinant {det:e} below tolerance {tol:e}")]
    DegenerateMoments { det: f64, tol: f64 },

    #[error("non-positive-definite moments: radicand {radicand:e}")]
    NonPositiveDefinite { radicand: f64 },

    #[error("model fitted at tau = {model_tau} s cannot serve tau = {requested_tau} s")]
    LagMismatch { model_tau: f64, requested_tau: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no valid prediction points for lag {lag}")]
    NoPredictions { lag: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
