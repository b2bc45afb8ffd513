//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside the supported range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Every candidate pair was shorter than the minimum secant length.
    #[error("no usable secants: all pairs are degenerate")]
    EmptySecantSet,

    /// The power iteration ran out of its iteration budget. The best
    /// iterate seen so far is attached for diagnostics.
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best_value: f64,
        best_vector: Vec<f64>,
    },

    /// A trace rescale was requested on an embedding whose factors are
    /// all zero (or orthogonal to every secant under AUTO scaling).
    #[error("degenerate embedding: nothing to rescale")]
    DegenerateEmbedding,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("duplicate matrix label: {0}")]
    DuplicateLabel(String),
}

impl Error {
    /// True when the error is the caller's fault rather than a runtime
    /// or numerical failure. The CLI maps this to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
