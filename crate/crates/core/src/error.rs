use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SddError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SddError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("index range [{start}, {end}) out of bounds for length {len}")]
    Bounds { start: usize, end: usize, len: usize },

    #[error("bandwidth M={bandwidth} needs 2M+1 <= n, got n={n}")]
    Bandwidth { bandwidth: usize, n: usize },

    #[error("block structure violated: max deviation {max_deviation:.3e} exceeds {tolerance:.1e}")]
    BlockStructure { max_deviation: f64, tolerance: f64 },

    #[error("input matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is singular (minimum eigenvalue {min_eigenvalue:.3e})")]
    Singular { min_eigenvalue: f64 },

    #[error("degenerate path: {0}")]
    DegeneratePath(String),

    #[error("model generation failed: {0}")]
    Generation(String),

    #[error("RRMSE undefined: ground truth has no entry above the edge tolerance")]
    UndefinedRrmse,

    #[error("frequency index {freq_index}: {source}")]
    AtFrequency {
        freq_index: i64,
        #[source]
        source: Box<SddError>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl SddError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SddError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_frequency(self, freq_index: i64) -> Self {
        SddError::AtFrequency {
            freq_index,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the numbers rather than by the inputs' shape or format.
    pub fn is_numerical(&self) -> bool {
        match self {
            SddError::NotPsd { .. }
            | SddError::Singular { .. }
            | SddError::DegeneratePath(_)
            | SddError::Generation(_)
            | SddError::UndefinedRrmse => true,
            SddError::AtFrequency { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for SddError {
    fn from(e: serde_json::Error) -> Self {
        SddError::Serialization(e.to_string())
    }
}
