use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interference kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid arrivals: {0}")]
    InvalidArrivals(String),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("moment order {0} not supported (expected 1, 2 or 3)")]
    MomentOrder(u32),

    #[error("power iteration did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },

    #[error("state space of {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: usize },

    #[error("stationary solve failed: {0}")]
    SingularSolve(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0} is not applicable to this scenario")]
    Inapplicable(String),
}
