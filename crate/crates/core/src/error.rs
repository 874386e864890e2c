//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A table lookup failed (no extrapolation is performed).
    #[error("not found: {0}")]
    NotFound(String),

    /// An iterative eigensolver failed to reach its residual target.
    #[error("ground-state iteration did not converge after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Time propagation could not meet its local error target.
    #[error("propagation failed: {0}")]
    Propagation(String),

    /// A trace contains no interior concurrence maximum.
    #[error("no peak: {0}")]
    NoPeak(String),

    /// Every grid point of a coupling sweep failed to produce a peak.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// A request exceeds a hard size limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A router plan connects some node more than once.
    #[error("exclusivity violation: node {node} appears in more than one pair")]
    ExclusivityViolation { node: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
