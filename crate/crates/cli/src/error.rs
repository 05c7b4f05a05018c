use std::path::PathBuf;

use asymgauge::lm::LmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("missing {}; run `asymgauge {subcommand}` first", .artifact.display())]
    Dependency { artifact: PathBuf, subcommand: &'static str },
    #[error("scorer: {0}")]
    Scorer(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Dependency { .. } => 3,
            CliError::Scorer(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    pub fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LmError> for CliError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::ScorerChannel { .. } | LmError::ScorerProtocol(_) | LmError::IncompleteBatch { .. } => {
                CliError::Scorer(e.to_string())
            }
            LmError::StaleCheckpoint { .. } | LmError::Checkpoint { .. } => CliError::Validation(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
