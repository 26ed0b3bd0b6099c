//! Densities, moments and tail asymptotics for perpetuities and (random-horizon)
//! sums of geometric Brownian motion, with Asian option and annuity pricing on top.
//!
//! All laws live on a uniform grid in `u = log(1 + x)` ([`GridDensity`]) and are
//! obtained by iterating the Gaussian-kernel operator that maps the law of `X`
//! to the law of `A (1 + X)`.

pub mod density;
pub mod distributions;
pub mod error;
pub mod mc;
pub mod moments;
pub mod pricing;
mod quad;
pub mod specfun;
pub mod tails;

pub use density::{Grid, GridDensity, SolveOptions, SolveReport};
pub use distributions::{ModelParams, ReducedParams};
pub use error::{Error, Result};
pub use mc::{McConfig, McEstimate};
pub use moments::MultiplierMoments;
pub use pricing::{AsianSpec, MortalityModel};
pub use tails::TailAsymptote;
