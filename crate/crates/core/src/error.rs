use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IpslError>;

#[derive(Debug, Error)]
pub enum IpslError {
    /// A configuration value violates its documented constraint.
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    /// An operation was invoked outside its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("genome codec error: {0}")]
    Codec(String),

    #[error("structural error: {0}")]
    Structural(String),

    /// A statistic is not defined for the given input (e.g. zero variance).
    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { line: usize, key: String },

    #[error("validation error: `{key}` {constraint}")]
    Validation { key: String, constraint: String },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IpslError {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        IpslError::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IpslError::Io {
            path: path.into(),
            source,
        }
    }
}
