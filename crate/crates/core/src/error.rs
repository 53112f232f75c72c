use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Missing or unparseable file in a bundle.
    #[error("format error: {0}")]
    Format(String),

    /// A structural invariant does not hold; `path` names the offending field.
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("truncated data: {0}")]
    Truncation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training failed: {0}")]
    Training(String),

    /// Configuration schema violation; `path` is the dotted YAML path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("user `{user}` skipped: {reason}")]
    SkipUser { user: String, reason: String },

    #[error("session `{0}` skipped: no user could be evaluated")]
    SessionSkipped(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
