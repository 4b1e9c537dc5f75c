use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed corpus text; `line` is 1-based.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corpus must be tagged")]
    Untagged,

    #[error("gold and predicted corpora differ at sentence {sentence}, token {token}: {message}")]
    Alignment {
        sentence: usize,
        token: usize,
        message: String,
    },

    #[error("expected {expected} version {expected_version}, found {found} version {found_version}")]
    VersionMismatch {
        expected: String,
        expected_version: u32,
        found: String,
        found_version: u32,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown word {0:?}")]
    OutOfVocabulary(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
