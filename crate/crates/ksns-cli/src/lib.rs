//! Command-line front end of `ksns`: configuration, checks, experiments and reports.

pub mod checks;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    /// A run finished but some check failed; exit code 1.
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error(transparent)]
    Lib(#[from] ksns::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Lib(ksns::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}
