use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid I/Q frame: {0}")]
    Frame(String),

    #[error("zero power: frame has no signal energy")]
    ZeroPower,

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("{context}: parse error at line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("matrix not positive definite, increase jitter")]
    NotPositiveDefinite,

    #[error("split error: {0}")]
    Split(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attributes a parse error to `path`.
    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                context: path.display().to_string(),
                line,
                message,
            },
            other => other,
        }
    }
}
