use thiserror::Error;

/// Errors produced by the numerical kernels and the optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("quadrature did not converge at gamma = {gamma} on piece [{lo}, {hi}] after {evaluations} evaluations")]
    Quadrature {
        gamma: f64,
        lo: f64,
        hi: f64,
        evaluations: usize,
    },

    #[error("curve evaluation failed at index {index}: {source}")]
    Curve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible problem: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
