//! Front end binding the `fbp-core` modules into reproducible runs.

pub mod artifacts;
pub mod commands;
pub mod config;

use thiserror::Error;

/// Environment variable naming the output root.
pub const OUTPUT_ROOT_ENV: &str = "FBP_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("corrupt or missing artifact: {0}")]
    Corrupt(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Corrupt(_) => 1,
        }
    }
}
