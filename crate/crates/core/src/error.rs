use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical machinery.
///
/// Variants carry enough context to be reported without the caller
/// re-deriving where the failure happened.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite sample {value} at point {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate solution: H({radius}) = {value:e} is below the positivity floor")]
    Degenerate { radius: f64, value: f64 },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NonFinite { .. } => "non-finite",
            Error::Precondition(_) => "precondition",
            Error::Degenerate { .. } => "degenerate",
            Error::Decomposition(_) => "decomposition",
            Error::Config { .. } => "config",
            Error::Solver(_) => "solver",
            Error::Fit(_) => "fit",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
