//! Passive RF human sensing.
//!
//! Ambient RF energy in the 300–420 MHz range is captured as raw 8-bit I/Q
//! frames, reduced to one average power per band center, and stacked across
//! sensors into a feature vector. Those vectors feed classifiers (subject
//! authentication, grid localization, activity recognition) and a Gaussian
//! process regressor for coordinate-level localization.
//!
//! The [`simulator`] module generates labeled RF scenes deterministically, so
//! every stage can be exercised without capture hardware.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gpr;
mod io;
pub mod rng;
pub mod simulator;
pub mod spectrum;

pub use error::{Error, Result};
pub use io::write_atomic;
