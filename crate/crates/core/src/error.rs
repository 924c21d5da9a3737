use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown task `{0}`")]
    Task(String),
    #[error("vocabulary error: {0}")]
    Vocab(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Value {
        path: String,
        line: usize,
        message: String,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("alignment error in document `{doc}`: {message}")]
    Alignment { doc: String, message: String },
    #[error("training diverged at iteration {iteration}: {message}")]
    Training { iteration: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
