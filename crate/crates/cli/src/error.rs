use std::path::PathBuf;

use lifecap::decoder::DecodeError;
use lifecap::joint::JointError;
use lifecap::retrieval::RetrievalError;
use lifecap::Error;
use thiserror::Error;

/// Command failure, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("data error: {0}")]
    Data(String),
    #[error("error: {0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::NotFound(_) => 2,
            CliError::Data(_) => 65,
            CliError::Failure(_) => 1,
        }
    }

    /// Treats any library error as a usage error, except a missing file.
    pub fn usage(e: Error) -> Self {
        match e {
            Error::NotFound(p) => CliError::NotFound(p),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotFound(p) => CliError::NotFound(p),
            Error::Io { .. } => CliError::Failure(msg),
            Error::Joint(JointError::InvalidBeta(_))
            | Error::Decode(DecodeError::InvalidConfig(_))
            | Error::Retrieval(RetrievalError::InvalidConfig(_)) => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}
