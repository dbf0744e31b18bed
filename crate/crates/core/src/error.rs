use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: requested {requested} exceeds the configured limit of {limit}")]
    Resource {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("primorial p_{k}# overflows 128-bit integers")]
    Overflow { k: usize },

    #[error("{what} needs at least {needed} elements, got {got}")]
    Length {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("values must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },

    #[error("{value} is not prime")]
    NotPrime { value: u64 },

    #[error("t = {t} lies on sample point {point}; use the limit form")]
    Pole { t: f64, point: f64 },

    #[error("{t} is not a point of the sample lattice")]
    NotALatticePoint { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("wavelength undefined at zero frequency")]
    ZeroFrequency,

    #[error("degenerate chart range: {0}")]
    DegenerateRange(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    /// True for errors caused by bad input rather than a failing computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParam(_) | Error::Parse(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
