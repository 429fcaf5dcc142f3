use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sum or integral that does not converge for the given parameters.
    #[error("divergence: {0}")]
    Divergence(String),

    /// A numerical procedure failed to reach its tolerance.
    #[error("numeric error: {message} (achieved residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    /// The requested computation exceeds the configured size limits.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Root bracketing failed.
    #[error("solver error: {message} (last bracket [{lo}, {hi}])")]
    Solver { message: String, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
