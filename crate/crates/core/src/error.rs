//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or precondition check failed before any computation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A field operation left the grid (sampling, backtrace, support margin).
    #[error("out of grid domain: {0}")]
    OutOfDomain(String),

    /// A construction could not certify its contract (e.g. hyperbolicity fit).
    #[error("construction failed: {0}")]
    Construction(String),

    /// A quantity that must be nonzero was degenerate.
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// Probe trajectory collapsed into the singular point.
    #[error("trajectory collapsed: |phi| = {radius:.3e} at t = {t:.6}")]
    Collapsed { t: f64, radius: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn out_of_domain(msg: impl Into<String>) -> Self {
        Error::OutOfDomain(msg.into())
    }
}
