use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// NaN or Inf appeared during time stepping; `tau` is the last finite time.
    #[error("numerical blowup at tau = {tau}")]
    NumericalBlowup { tau: f64 },
    #[error("shooting bracket not found: {0}")]
    SearchFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
