//! Config parsing, artifact persistence and the experiment runner behind the
//! `frac` binary.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod snapshot;
pub mod synth;

use std::path::{Path, PathBuf};

use frac_core::FracError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] config::ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] FracError),
    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// How a run ended, mapped onto the process exit code by the binary.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Completed,
    /// completed, but something the user should look at happened
    Warnings(Vec<String>),
}

impl Status {
    pub fn from_warnings(w: Vec<String>) -> Status {
        if w.is_empty() {
            Status::Completed
        } else {
            Status::Warnings(w)
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Completed => 0,
            Status::Warnings(_) => 2,
        }
    }
}
