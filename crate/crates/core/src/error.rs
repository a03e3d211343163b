use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coefficient is not uniformly positive: certified lower bound {a_min}")]
    CoefficientValidity { a_min: f64 },

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("CG did not reach tolerance after {iterations} iterations (last relative residual {:e})", .residual_history.last().copied().unwrap_or(f64::NAN))]
    Convergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("sample {path} failed: {source}")]
    Sample {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
