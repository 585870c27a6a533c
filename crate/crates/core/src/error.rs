//! Crate-wide error taxonomy.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Domain construction rejected the requested shape or resolution.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A parameter is outside its admissible range (s in (0,1), p in (1,inf), ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A grid function is unusable (wrong length, non-finite, identically zero
    /// where a non-trivial function is required).
    #[error("degenerate grid function: {0}")]
    Degenerate(String),

    /// The k-NN graph underlying the geodesic metric is not connected.
    #[error("geodesic graph is disconnected: {isolated} of {total} nodes unreachable")]
    Disconnected { isolated: usize, total: usize },

    /// An iterative solver ran out of iterations.
    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}
