//! Exact and approximating Markov kernels with perturbation bounds.
//!
//! Kernels, Lyapunov drift certificates, weighted and capped metrics, a pure
//! bound engine, finite-state oracles, and the probit, logistic and Gaussian
//! process applications.

pub mod bounds;
pub mod error;
pub mod gp;
#[cfg(test)]
mod invariants;
pub mod kernels;
pub mod logistic;
pub mod lyapunov;
pub mod metrics;
pub mod oracle;
pub mod probit;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::StateVector;
pub use rng::RandomSource;
