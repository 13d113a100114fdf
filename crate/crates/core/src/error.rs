use std::path::PathBuf;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so that front ends can map them onto a small set
/// of exit codes: [`Error::is_usage`] distinguishes configuration mistakes
/// from problems with the data being processed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("tensor `{name}`: {reason}")]
    Tensor { name: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid pattern `{pattern}`: {reason}")]
    Pattern { pattern: String, reason: String },

    #[error("unknown reinitialization function `{0}`")]
    UnknownReinit(String),

    #[error("invalid case tag `{0}`")]
    BadTag(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("need >=2 runs in group `{group}` (got {got})")]
    TooFewRuns { group: String, got: usize },

    #[error("unknown case `{0}`")]
    UnknownCase(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn tensor(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Tensor {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by how the tool was invoked or configured,
    /// as opposed to malformed or unsuitable input data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Pattern { .. }
                | Error::UnknownReinit(_)
                | Error::BadTag(_)
                | Error::UnknownCase(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
