use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("kernel is not integrable against this measure: {0}")]
    Singularity(String),
    #[error("degenerate measure: {0}")]
    Degenerate(String),
    #[error("probe {0} lies on the support")]
    ProbeOnSupport(f64),
    #[error("breakpoint count {count} exceeds the bound {bound}")]
    Overflow { count: usize, bound: usize },
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
    #[error("no witness found: {0}")]
    WitnessNotFound(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("dimension error: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("root finding failed: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
