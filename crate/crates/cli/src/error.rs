use std::path::PathBuf;

use thiserror::Error;

/// Failure of a whole command. Per-section estimation problems are embedded
/// in the report instead.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {count} problem(s)\n{}", .diagnostics.join("\n"))]
    Dataset { path: PathBuf, count: usize, diagnostics: Vec<String> },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] survquack_core::Error),
}

impl CliError {
    /// 0 success, 2 input or validation error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
