use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters for which the requested law does not exist.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// A fixed-point iteration stopped at `max_iter` before reaching the tolerance.
    #[error("no convergence after {iterations} iterations (last delta {last_delta:.3e})")]
    NonConvergence {
        iterations: usize,
        last_delta: f64,
        trace: Vec<f64>,
    },

    /// An expectation whose integrand grows at least as fast as the tail decays.
    #[error("divergent expectation: payoff growth {growth} >= tail exponent {exponent}")]
    DivergentExpectation { growth: f64, exponent: f64 },

    /// Moment `k` of the requested law is infinite.
    #[error("moment of order {0} does not exist")]
    MomentDoesNotExist(u32),

    /// The Gaussian kernel is not resolved by the grid step.
    #[error("grid too coarse: kernel width {kernel_width:.4e} < 3 * step {step:.4e}")]
    GridTooCoarse { kernel_width: f64, step: f64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
