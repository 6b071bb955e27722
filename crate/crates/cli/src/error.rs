use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {message}")]
    Numerical { message: String, diagnostic: serde_json::Value },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Validation(_) => 4,
        })
    }

    pub fn numerical(message: impl Into<String>, diagnostic: serde_json::Value) -> Self {
        CliError::Numerical { message: message.into(), diagnostic }
    }
}

pub fn io_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}
