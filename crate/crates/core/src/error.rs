use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("single-site potential is not pointwise evaluable (delta kind)")]
    NotPointwise,
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("zero transmission (|1/T| overflow), only possible at E = 0")]
    ZeroTransmission,
    #[error("unwrap hazard at site {site}: phase increment {increment:.6} rad")]
    UnwrapHazard { site: usize, increment: f64 },
    #[error("unsupported regime: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
