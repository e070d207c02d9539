//! Error type shared across the crate.

use std::path::PathBuf;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type.
///
/// The CLI maps variants to exit codes: [`Error::Argument`] exits with 2,
/// everything else with 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem failure, tagged with the path that caused it.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (bad magic, truncation, invalid JSON, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Caller passed a value outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Loaded data violates a cross-record consistency rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// Numerical failure (non-finite values, factorization breakdown, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A representative-selection step produced an empty positive set.
    #[error("degenerate selection: {0}")]
    DegenerateSelection(String),
}

impl Error {
    /// Wraps an [`std::io::Error`] together with the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
