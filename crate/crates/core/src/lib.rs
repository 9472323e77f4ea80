//! Semiclassical cavity cooling of laser-driven atoms: analytic low-field
//! coefficients, a truncated-Fock coefficient oracle and stochastic ensembles.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod field;
pub mod fpe;
pub mod noise;
pub mod oracle;
pub mod params;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use params::Params;
