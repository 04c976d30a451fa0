//! Simulator-backed training of quantum neural network regression models
//! with variance regularization.
//!
//! The crate bundles a minimal statevector simulator, diagonal cost
//! operators, a Chebyshev-encoding circuit ansatz with parameter-shift
//! differentiation, a variance-regularized ADAM training loop with an
//! adaptive gradient shot budget, and the benchmark pipelines (function
//! regression and water-PES interpolation) used to evaluate it.

pub mod config;
pub mod error;
pub mod experiments;
pub mod observable;
pub mod output;
pub mod qnn;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
