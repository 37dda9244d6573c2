//! Batch front-end: configuration, waveform files and result emission.

use std::fmt::Display;

pub mod app;
pub mod config;
pub mod output;
pub mod waveform;

/// Why a command stopped. Each variant maps to one process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Invalid configuration or input file; exit code 2.
    #[error("invalid input at {path}: {message}")]
    Schema { path: String, message: String },
    /// Numerical failure during computation; exit code 3.
    #[error("numerical error{}: {source}", index.map(|i| format!(" at sample {i}")).unwrap_or_default())]
    Numerical {
        index: Option<u64>,
        source: postselect::Error,
    },
    /// Filesystem failure; exit code 1.
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn schema(path: impl Into<String>, message: impl Display) -> Self {
        Failure::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn numerical(index: Option<u64>, source: postselect::Error) -> Self {
        Failure::Numerical { index, source }
    }

    pub fn io(context: impl Display, err: impl Display) -> Self {
        Failure::Io(format!("{context}: {err}"))
    }

    /// Prefixes the path of a schema error.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Failure::Schema { path, message } => Failure::Schema {
                path: format!("{prefix}: {path}"),
                message,
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Schema { .. } => 2,
            Failure::Numerical { .. } => 3,
            Failure::Io(_) => 1,
        }
    }
}
