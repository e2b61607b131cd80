use thiserror::Error;

/// Errors raised by design, simulation and export routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Problem dimensions violate a bound; `bound` names the violated inequality.
    #[error("dimension error: {bound}")]
    Dimension { bound: String },

    /// A matrix that must be inverted is numerically singular.
    #[error("conditioning error: {what} (condition estimate {condition:.3e})")]
    Conditioning { what: String, condition: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
