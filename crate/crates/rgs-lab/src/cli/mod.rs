//! Command-line surface: experiment configuration, on-disk artifact formats,
//! the gen/run/verify/plot commands, and the exit-code contract.
//!
//! Exit codes: `0` success (including `--help`/`--version`), `1` usage or
//! configuration errors, `2` a verification suite that ran and failed, `3`
//! runtime failures (I/O, solver breakdown).

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod plot;
pub mod verify;

pub use config::ExperimentConfig;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {failed} of {total} checks")]
    VerifyFailed { failed: usize, total: usize },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::VerifyFailed { .. } => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub(crate) fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}
