use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("theme config: {0}")]
    ThemeConfig(String),

    #[error("theme {theme:?}: no seed term resolved in the vocabulary (dropped: {dropped:?})")]
    UnanchoredTheme { theme: String, dropped: Vec<String> },

    #[error("unknown theme {0:?}")]
    UnknownTheme(String),

    #[error("embedding file: {0}")]
    EmbeddingFormat(String),

    #[error("embedding table has no vector for {kind} {id:?}")]
    MissingEmbedding { kind: &'static str, id: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("annotations: {0}")]
    Annotation(String),

    #[error("engine failure: {0}")]
    Engine(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::InvalidParam(message.into())
    }

    pub(crate) fn engine(message: impl Into<String>) -> Self {
        Error::Engine(message.into())
    }

    /// True for failures raised while fitting a model rather than while reading inputs.
    pub fn is_engine_failure(&self) -> bool {
        matches!(self, Error::Engine(_) | Error::UnanchoredTheme { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::parse(line, e.to_string())
    }
}
