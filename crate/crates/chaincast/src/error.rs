use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(chaincast_core::Error),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }
}

impl From<chaincast_core::Error> for CliError {
    fn from(e: chaincast_core::Error) -> Self {
        use chaincast_core::Error as E;
        match e {
            E::GappedMeasure | E::UnsupportedMapping(_) | E::PointMasses | E::NotInSzegoClass(_) => {
                CliError::Unsupported(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}
