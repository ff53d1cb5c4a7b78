//! Regenerative rejection sampling and the renewal-theory machinery around it.

pub mod cli;
pub mod coupling;
pub mod dists;
pub mod error;
pub mod estimators;
pub mod probit;
pub mod quadrature;
pub mod renewal;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RandomStream;
