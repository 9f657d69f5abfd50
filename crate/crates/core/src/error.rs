use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Node indices are row-major (`i * n1 + j`) so they can be fed back into
/// [`crate::grid::ChartGrid::coords`].
#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("base metric is not positive definite at node {node} (theta = {coord:.6})")]
    NonPositiveMetric { node: usize, coord: f64 },

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("non-finite {quantity} at node {node}")]
    NonFinite { quantity: &'static str, node: usize },

    #[error("mean curvature is not positive at node {node} (H = {value:.6e}); the flow requires mean-convex data")]
    NonPositiveMeanCurvature { node: usize, value: f64 },

    #[error("parabolicity lost at node {node} (smallest eigenvalue {value:.6e})")]
    Degenerate { node: usize, value: f64 },

    #[error("time step {dt:.3e} exceeds the stability bound {bound:.3e}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config: {0}")]
    ConfigGeneral(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checkpoint/config mismatch: grid hash {found:016x} in checkpoint, {expected:016x} configured")]
    GridMismatch { expected: u64, found: u64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FlowError>;

impl FlowError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FlowError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FlowError::Format { path: path.into(), message: message.into() }
    }
}
