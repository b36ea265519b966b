use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(&'static str),

    #[error("unsupported resampling direction: {from} Hz -> {to} Hz (only downsampling is supported)")]
    UnsupportedDirection { from: u32, to: u32 },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn path(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Path {
            path: path.into(),
            source,
        }
    }
}
