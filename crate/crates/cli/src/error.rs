use std::path::PathBuf;

use thiserror::Error;

use twostage::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("{failed} of {total} recipes failed")]
    RecipesFailed { failed: usize, total: usize },
}

/// Process exit status for an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    DataError = 2,
    FitFailure = 3,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Io { .. } => ExitStatus::DataError,
            CliError::RecipesFailed { .. } => ExitStatus::FitFailure,
            CliError::Core(e) => match e {
                CoreError::Config(_) => ExitStatus::ConfigError,
                CoreError::Io { .. }
                | CoreError::MalformedRow { .. }
                | CoreError::UnknownColumn(_)
                | CoreError::NonBinaryValue { .. }
                | CoreError::Schema(_)
                | CoreError::InvalidDataset(_)
                | CoreError::MissingGenotype(_)
                | CoreError::InvalidGenotype { .. }
                | CoreError::EmptyPart(_)
                | CoreError::ClassTooSmall { .. }
                | CoreError::SampleMismatch(_)
                | CoreError::Parse(_)
                | CoreError::Csv(_) => ExitStatus::DataError,
                _ => ExitStatus::FitFailure,
            },
        }
    }
}
