use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: &'static str,
        requested: String,
        cap: String,
    },

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A bound was requested outside the parameter window where it is claimed.
    #[error("outside validity domain: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn resource(what: &'static str, requested: impl ToString, cap: impl ToString) -> Self {
        Error::Resource {
            what,
            requested: requested.to_string(),
            cap: cap.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
