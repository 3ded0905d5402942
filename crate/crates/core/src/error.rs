use thiserror::Error;

/// Errors raised while reading, validating or writing corpora.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: tag `{tag}` does not match [A-Z_]+")]
    InvalidTag { line: usize, tag: String },
    #[error("sentence {sentence}, token {token}: tag `{tag}` is not in the tag set")]
    UnknownTag {
        sentence: usize,
        token: usize,
        tag: String,
    },
    #[error("sentence {sentence}, token {token}: missing tag")]
    MissingTag { sentence: usize, token: usize },
    #[error("{0}")]
    Argument(String),
}

/// Errors from feature extraction, training, decoding and model files.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
