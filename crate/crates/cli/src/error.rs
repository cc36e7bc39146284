// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use thiserror::Error;

/// Command failure, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or unreadable input (exit 1).
    #[error("{0}")]
    Input(String),
    /// Failure while running or writing results (exit 2).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub(crate) fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

impl From<o3net::Error> for CliError {
    fn from(e: o3net::Error) -> Self {
        match e {
            o3net::Error::InvalidConfig(_) | o3net::Error::InvalidSeries(_) | o3net::Error::OutOfOrder { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
