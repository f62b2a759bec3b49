//! File formats and command implementations behind the `sqzspec` binary.
//!
//! Traces are comment-headed whitespace-delimited text with shot-noise
//! referenced decibel columns; configurations and fit reports are JSON.
//! All writes are atomic (write to a temporary sibling, then rename), and
//! every command echoes its fully resolved configuration so a run can be
//! reproduced from its log alone.

pub mod commands;
pub mod config;
pub mod report;
pub mod trace;

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes: 2 config, 3 fit, 4 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] config::ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("fit failed: {0}")]
    Fit(#[from] sqzspec_core::estimator::FitError),
    #[error("trace file error: {0}")]
    Trace(#[from] trace::TraceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("model error: {0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Trace(_) | CliError::Io { .. } => 4,
            CliError::Model(_) => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

/// Write `contents` to `path` atomically: a partial file never lands under
/// the final name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => return Err(CliError::io(path, std::io::Error::other("not a file path"))),
    };
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(())
}
