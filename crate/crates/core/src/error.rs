use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArpError>;

#[derive(Debug, Error)]
pub enum ArpError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or tensor dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An iterative method did not reach its tolerance.
    #[error("numerical failure in {context}: {diagnostics}")]
    Numerical {
        context: &'static str,
        diagnostics: String,
    },

    /// The requested (order, region, model) combination has no exact solver.
    #[error("unsupported combination: {0}")]
    Capability(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("objective evaluation failed: {0}")]
    Oracle(String),

    /// A generated instance violates one of its defining relations.
    #[error("instance construction failed ({relation}): {detail}")]
    Construction {
        relation: &'static str,
        detail: String,
    },

    #[error("ill-conditioned interpolation: {0}")]
    Conditioning(String),

    /// A completed run violates one of the complexity inequalities.
    #[error("audit failure ({name}): {detail}")]
    Audit { name: &'static str, detail: String },

    #[error("derivative norm is infinite: {0}")]
    InfiniteNorm(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ArpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ArpError::Io {
            path: path.into(),
            source,
        }
    }
}
