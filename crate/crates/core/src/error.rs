use std::path::PathBuf;

use thiserror::Error;

use crate::tree::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(#[from] Violation),

    #[error("newick parse error at byte {offset}: {message}")]
    Newick { offset: usize, message: String },

    #[error("root-to-leaf path for `{label}` has length {length}, expected 1 (tolerance {tolerance:e})")]
    NotUltrametric { label: String, length: f64, tolerance: f64 },

    #[error("leaf sets differ: {0}")]
    LeafSetMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("network {network}: entry ({v},{u}) differs from ({u},{v})")]
    Asymmetric { network: usize, v: usize, u: usize },

    #[error("network {network}: entry ({v},{u}) is {value}, expected 0 or 1")]
    NonBinary { network: usize, v: usize, u: usize, value: String },

    #[error("network {network}: diagonal entry ({v},{v}) must be 0")]
    SelfLoop { network: usize, v: usize },

    #[error("tree covariance is numerically singular")]
    SingularCovariance,

    #[error("log posterior is not finite at initialization after {attempts} attempts")]
    Initialization { attempts: usize },

    #[error("{0}")]
    Summary(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
