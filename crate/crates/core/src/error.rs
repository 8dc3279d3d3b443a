use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::AutodiffError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of the operation (angle range, negative
    /// toughness, non-finite input).
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller broke a precondition on shapes or orderings.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("degenerate loading path: {0}")]
    DegeneratePath(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training error at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },
    #[error("{path}: row {row}: {reason}")]
    Load {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("audit error: {0}")]
    Audit(String),
    #[error("search error: {0}")]
    Search(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Usage(_)
                | Error::Config(_)
                | Error::Load { .. }
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Csv(_)
        )
    }
}
