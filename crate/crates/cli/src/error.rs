use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {message}")]
    Config { message: String, field: Option<String> },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{} check(s) failed: {}", failed.len(), failed.join(", "))]
    Checks { failed: Vec<String> },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Machine-readable form printed to stderr and written as `error.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub status: i32,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<String>,
}

impl CliError {
    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 1 check failure, 2 config error, 3 solver failure; i/o errors count
    /// as configuration problems.
    pub fn status(&self) -> i32 {
        match self {
            CliError::Checks { .. } => 1,
            CliError::Config { .. } | CliError::Io { .. } => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let (kind, field, failed) = match self {
            CliError::Config { field, .. } => ("config", field.clone(), vec![]),
            CliError::Io { .. } => ("io", None, vec![]),
            CliError::Solver(_) => ("solver", None, vec![]),
            CliError::Checks { failed } => ("check", None, failed.clone()),
        };
        ErrorRecord {
            status: self.status(),
            kind,
            message: self.to_string(),
            field,
            failed,
        }
    }
}
