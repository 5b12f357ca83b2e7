use std::path::PathBuf;

use thiserror::Error;

use crate::cluster::ClusterError;
use crate::dataio::DataError;
use crate::diffcore::DiffError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    /// A loss term evaluated to NaN or infinity.
    #[error("non-finite loss term `{term}` ({detail})")]
    NonFiniteLoss { term: &'static str, detail: String },
    /// Training stopped on a numerical failure; the last finite state was
    /// saved when an output directory was available.
    #[error("training diverged at epoch {epoch}, batch {batch}: {cause}")]
    Diverged {
        epoch: usize,
        batch: usize,
        cause: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for numerical failures (NaN/inf) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::NonFiniteLoss { .. }
                | Error::Diff(DiffError::NonFiniteGradient(_))
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
