use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] shm_locate_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },

    /// The invocation itself is unusable (unreadable or malformed config).
    #[error("{detail}")]
    Usage { detail: String },

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, detail: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }

    pub fn usage(detail: impl Into<String>) -> Self {
        CliError::Usage { detail: detail.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on standard error.
    pub fn to_json(&self) -> Value {
        let error = match self {
            CliError::Core(e) => serde_json::to_value(e).unwrap_or_else(|_| json!({ "kind": "core" })),
            CliError::Io { path, source } => json!({ "kind": "io", "path": path, "detail": source.to_string() }),
            CliError::Format { path, detail } => json!({ "kind": "format", "path": path, "detail": detail }),
            CliError::Usage { detail } => json!({ "kind": "usage", "detail": detail }),
            CliError::ThreadPool(e) => json!({ "kind": "thread_pool", "detail": e.to_string() }),
        };
        json!({ "error": error, "message": self.to_string() })
    }
}
