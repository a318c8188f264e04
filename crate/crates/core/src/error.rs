use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) has non-positive weight {2}")]
    NonPositiveWeight(usize, usize, f64),
    #[error("node {0} is isolated (zero degree)")]
    IsolatedNode(usize),
    #[error("graph has {n} nodes, above the dense eigensolver limit of {limit}; use a polynomial approximation")]
    TooLargeForDense { n: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("underdetermined fit: {points} sample points for degree {degree}")]
    Underdetermined { points: usize, degree: usize },
    #[error("rank-deficient least-squares system")]
    RankDeficient,
    #[error("covariance is not positive definite even after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },
    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
    #[error("graph could not be generated connected after {0} attempts")]
    NotConnected(usize),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
