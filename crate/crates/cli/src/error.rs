use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mbsfn_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} validation instances failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    /// Process exit status: 2 configuration, 3 infeasible placement,
    /// 4 failed validation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(mbsfn_core::Error::InvalidParameter(_)) => 2,
            CliError::Core(mbsfn_core::Error::PackingInfeasible { .. }) => 3,
            CliError::ValidationFailed { .. } => 4,
            _ => 1,
        }
    }
}
