use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input; `location` names the file and line or record.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("encoder failed on pair (head {head}, tail {tail}): {message}")]
    Encoder {
        head: usize,
        tail: usize,
        message: String,
    },

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("loss became non-finite at step {step} on document {doc_id}")]
    Diverged { step: usize, doc_id: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("serialization failed: {0}")]
    Serialize(String),

    /// Some runs of a sweep or ablation failed; the rest were kept.
    #[error("{0}")]
    RunsFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.to_string(),
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Validation(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
