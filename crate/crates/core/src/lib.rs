//! Directivity-aware wavenumber-domain channel modelling for planar arrays:
//! coupling coefficients from element radiation patterns, their estimation
//! from simulated channels, effective degrees of freedom and ergodic
//! capacity.
//!
//! All lengths are in wavelengths and all gains are linear power ratios.

pub mod channel;
pub mod cli;
pub mod coupling;
pub mod emcc;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod pattern;
pub mod quadrature;
pub mod report;
pub mod rng;

pub use error::{Error, ErrorKind, Result};
