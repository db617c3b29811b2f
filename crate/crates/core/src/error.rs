use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("map parse error on line {line}: {msg}")]
    MapParse { line: usize, msg: String },
    #[error("map dimension mismatch: header says {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("no path between {from} and {to}")]
    NoPath { from: String, to: String },
    #[error("trajectory playback exhausted at t = {0:.3} s")]
    TraceExhausted(f64),
    #[error("every fusion source has zero information trace")]
    AllZeroTrust,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trace version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
