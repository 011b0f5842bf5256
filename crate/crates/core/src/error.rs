use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{op} is undefined for a zero matrix")]
    ZeroMatrix { op: &'static str },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("numeric failure{} at layer {layer}: {detail}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numeric {
        step: Option<usize>,
        layer: usize,
        detail: String,
    },

    #[error("divergence: {0}")]
    Divergence(String),

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {detail}")]
    Codec { path: PathBuf, detail: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code category: config=2, numeric=3, io=4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::EmptyInput(_) => 2,
            Error::Io { .. } | Error::Codec { .. } => 4,
            _ => 3,
        }
    }
}
