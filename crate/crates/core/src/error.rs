use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("unsupported field format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel evaluated at zero offset")]
    ZeroOffset,
    #[error("pair pattern mismatch between weights and dual field")]
    PatternMismatch,
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
    #[error("threshold {0} coincides with a sample value")]
    ThresholdCollision(f64),
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("set touches the grid boundary")]
    TouchesBoundary,
    #[error("point is not on the set boundary (distance {0})")]
    NotOnBoundary(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solution not converged: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
