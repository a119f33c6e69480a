use thiserror::Error;

/// Errors raised by the model, estimators, ingestion and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge after {iterations} iterations (bracket width {width})")]
    RootNotConverged { iterations: usize, width: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error estimate {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("series did not converge within {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("likelihood profile is not unimodal: {0}")]
    NotUnimodal(String),

    #[error("singleton classification: {0}")]
    Classification(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("simulation failed in cell {cell}, replicate {replicate}: {source}")]
    Simulation {
        cell: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether this error comes from a numerical routine failing rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoSignChange { .. }
            | Error::RootNotConverged { .. }
            | Error::Quadrature { .. }
            | Error::SeriesNotConverged { .. }
            | Error::NotUnimodal(_) => true,
            Error::Simulation { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {x}")))
    }
}

pub(crate) fn ensure_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")))
    }
}
