use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("training diverged at epoch {epoch}{}", member_suffix(*.member))]
    Diverged { epoch: usize, member: Option<usize> },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("IDX format error: {0}")]
    Format(String),

    #[error("IDX payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

fn member_suffix(member: Option<usize>) -> String {
    match member {
        Some(i) => format!(" (ensemble member {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags a divergence with the ensemble member that produced it.
    pub fn in_member(self, index: usize) -> Self {
        match self {
            Error::Diverged { epoch, .. } => Error::Diverged {
                epoch,
                member: Some(index),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
