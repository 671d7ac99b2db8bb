use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("drift is unrepresentable: Gram matrix is zero but the right-hand side is not")]
    UnrepresentableDrift,

    #[error("solve failed at node k={k} (t={t}): {source}")]
    NodeSolve {
        k: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("ill-conditioned Gram matrix at node k={k} (t={t}); pseudo-inverse fallback used with ridge 0")]
    RankDeficient { k: usize, t: f64 },

    #[error("chain {chain} produced a non-finite state at step {step} (t={t})")]
    ChainDiverged { chain: usize, step: usize, t: f64 },

    #[error("{} chain(s) failed; first: {}", .0.len(), .0[0])]
    Chains(Vec<Error>),

    #[error("covariance is not symmetric positive-definite")]
    NotPositiveDefinite,

    #[error("not a drift table (bad magic)")]
    NotATable,

    #[error("unsupported drift table version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt table: truncated or malformed {0} section")]
    CorruptTable(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// True for failures rooted in numerics rather than usage or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::UnrepresentableDrift
                | Error::NodeSolve { .. }
                | Error::RankDeficient { .. }
                | Error::ChainDiverged { .. }
                | Error::Chains(_)
                | Error::NotPositiveDefinite
        )
    }
}
