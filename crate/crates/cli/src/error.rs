use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: hrom_core::Error,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn artifact(path: &Path, message: impl Into<String>) -> Self {
        CliError::Artifact {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Wraps a core error with the pipeline stage it came from.
    pub fn stage(stage: &'static str) -> impl FnOnce(hrom_core::Error) -> Self {
        move |source| CliError::Core { stage, source }
    }

    /// 2 config, 3 numeric, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } | CliError::Artifact { .. } => 4,
            CliError::Core { source, .. } => match source {
                e if e.is_numeric() => 3,
                hrom_core::Error::Io(_) | hrom_core::Error::Format(_) => 4,
                _ => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "numeric",
            _ => "io",
        }
    }

    pub fn record(&self, command: &str) -> ErrorRecord {
        ErrorRecord {
            command: command.to_string(),
            kind: self.kind(),
            exit_code: self.exit_code(),
            stage: match self {
                CliError::Core { stage, .. } => Some(stage),
                _ => None,
            },
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure record written as `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub command: String,
    pub kind: &'static str,
    pub exit_code: i32,
    pub stage: Option<&'static str>,
    pub message: String,
}
