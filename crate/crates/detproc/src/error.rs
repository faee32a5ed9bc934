//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel construction, sampling and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range (e.g. a Jacobi exponent `s <= -1`).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An evaluation point lies outside the domain of a kernel or map.
    #[error("domain violation: {0}")]
    Domain(String),

    /// A multiplicative functional was evaluated on a configuration with a
    /// particle coinciding with the pole `q`.
    #[error("singular configuration: particle {particle} coincides with q = {q}")]
    SingularConfiguration { particle: f64, q: f64 },

    /// Eigendecomposition, quadrature or another numerical routine failed to
    /// reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Experiment configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
