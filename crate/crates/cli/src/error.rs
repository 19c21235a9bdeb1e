use std::io;
use std::path::{Path, PathBuf};

use swarmbc_core::metrics::MetricsError;
use swarmbc_core::theory::TheoryError;
use swarmbc_core::train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path} already exists; pass --force to overwrite it")]
    Exists { path: PathBuf },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 for usage, configuration and file problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(err: TrainError) -> Self {
        match err {
            TrainError::Diverged { .. } => CliError::Numerical(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        match err {
            MetricsError::DegenerateBaseline { .. } => CliError::Numerical(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(err: TheoryError) -> Self {
        match err {
            TheoryError::TiedMaxima(_) | TheoryError::Vanished => CliError::Numerical(err.to_string()),
            _ => CliError::Usage(err.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
