use thiserror::Error;

/// Errors raised by the solver and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("node lookup failed: {0}")]
    NodeLookup(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate profile: only {positive} of {total} radii carry a positive oscillation")]
    DegenerateProfile { positive: usize, total: usize },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("critical point: {0}")]
    CriticalPoint(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
