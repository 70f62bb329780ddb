use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("line {line}: sample `{sample_id}`: field `{field}`: {reason}")]
    InvalidSample {
        line: usize,
        sample_id: String,
        field: String,
        reason: String,
    },

    #[error("invalid config: `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite gradient in layer {layer} ({kind} index {index}): {value}")]
    NonFiniteGradient {
        layer: usize,
        kind: &'static str,
        index: usize,
        value: f64,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("bad checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
