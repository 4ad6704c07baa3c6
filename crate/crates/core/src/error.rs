use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input file does not follow its format.
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    /// Structurally valid input whose content breaks an invariant
    /// (duplicate ids, duplicate URLs, inconsistent counts).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A serialized artifact has the wrong header, version or section layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("job failed on document {doc_id} (shard {shard}): {message}")]
    MapFailed { doc_id: String, shard: usize, message: String },

    #[error("job failed reducing key {key}: {message}")]
    ReduceFailed { key: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), line, message: message.into() }
    }

    /// True for errors caused by the data rather than by the invocation.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
