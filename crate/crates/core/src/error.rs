use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The endpoint could not be reached or kept failing after all retries.
    #[error("transport failure talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: usize,
        message: String,
    },

    /// The endpoint answered with a non-retryable error status.
    #[error("{endpoint} returned HTTP {status}: {message}")]
    Remote {
        endpoint: String,
        status: u16,
        message: String,
    },

    /// The endpoint answered, but the payload breaks the protocol.
    #[error("protocol violation from {endpoint}: {message}")]
    Protocol { endpoint: String, message: String },

    #[error("{stage} failed for {doc_id} sentence {sentence}: {source}")]
    Stage {
        doc_id: String,
        sentence: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(doc_id: &str, sentence: usize, stage: &'static str, source: Error) -> Self {
        Error::Stage {
            doc_id: doc_id.to_string(),
            sentence,
            stage,
            source: Box::new(source),
        }
    }
}
