use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters outside the regime where the lattice model approximates the
    /// continuum waveguide (e.g. coupling too strong).
    #[error("validity: {0}")]
    Validity(String),

    #[error("geometry: {0}")]
    Geometry(String),

    /// A basis, state or operator built for one model was used with another.
    #[error("consistency: {0}")]
    Consistency(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no bound state: {0}")]
    NoBic(String),

    #[error("time reversal is invalid: {0}")]
    TimeReversal(String),

    #[error("propagator method mismatch: {0}")]
    MethodMismatch(String),

    #[error("non-finite amplitude at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("dimension {dim} exceeds the limit {limit}")]
    Dimension { dim: usize, limit: usize },

    #[error("horizon: {0}")]
    Horizon(String),

    #[error("resource: {0}")]
    Resource(String),

    #[error("procedure stalled: {0}")]
    Stall(String),

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 flags a failed physical check, 3 a resource problem and 1 anything
    /// else (bad input, IO).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Horizon(_) | Error::NonFinite { .. } | Error::Stall(_) => 2,
            Error::Resource(_) | Error::Dimension { .. } => 3,
            _ => 1,
        }
    }
}
