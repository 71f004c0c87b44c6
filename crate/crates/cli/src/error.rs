use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("sample too small: {0}")]
    SampleTooSmall(String),
    #[error("every replication failed in cell {0}")]
    AllFailed(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(mvgls::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::AllFailed(_) => 3,
            CliError::SampleTooSmall(_) => 4,
            CliError::Io { .. } | CliError::Library(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<mvgls::Error> for CliError {
    fn from(e: mvgls::Error) -> Self {
        match e {
            mvgls::Error::InvalidConfig(m) => CliError::Config(m),
            e @ mvgls::Error::InsufficientSample { .. } => CliError::SampleTooSmall(e.to_string()),
            e => CliError::Library(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
