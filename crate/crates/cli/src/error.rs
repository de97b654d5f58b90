use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario file or command line does not match the schema.
    #[error("{0}")]
    Schema(String),
    #[error("solver failure: {0}")]
    Solver(soliton_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// One or more acceptance criteria did not hold.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<soliton_core::Error> for CliError {
    fn from(e: soliton_core::Error) -> Self {
        use soliton_core::Error as E;
        match e {
            E::Instability { .. } | E::DegenerateTopology { .. } => CliError::Solver(e),
            other => CliError::Schema(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
