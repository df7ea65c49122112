use std::path::PathBuf;

use thiserror::Error;

use crate::alignment::AlignError;
use crate::decoder::DecodeError;
use crate::joint::JointError;
use crate::metrics::MetricError;
use crate::retrieval::RetrievalError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error, wrapping the per-stage errors plus file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Joint(#[from] JointError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{}: manifest contains no image records", .0.display())]
    EmptyManifest(PathBuf),
    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),
    #[error("no reference sentences for image(s): {}", .0.join(", "))]
    MissingReferences(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }
}
