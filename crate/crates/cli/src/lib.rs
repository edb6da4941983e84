//! Command-line wiring for the speech-emotion-recognition engine.
//!
//! Exit codes: 0 success, 1 check/assertion failure, 2 input or config
//! error, 3 numerical abort.

pub mod commands;
pub mod config;
pub mod pgm;

use emohrnet_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad input, unreadable files, invalid configuration. Exit code 2.
    Input(String),
    /// A verification check failed. Exit code 1.
    Check(String),
    /// Training aborted on a non-finite loss. Exit code 3.
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Check(msg) | CliError::Numeric(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}
