//! Simulation of an ultrafast gradient-echo optical memory in which the
//! broadening is produced by the refractive-index dynamics of impulsively
//! aligned linear molecules.
//!
//! The pipeline is `rotor` (thermal alignment) -> `medium` (refractive
//! index) -> `maxwell_bloch` (signal propagation through two-level atoms)
//! -> `protocol` (storage, retrieval and efficiency analysis). `field`
//! builds the signal and provides spectral diagnostics.

pub mod error;
pub mod exec;
pub mod field;
pub mod grid;
pub mod io;
pub mod maxwell_bloch;
pub mod medium;
pub mod protocol;
pub mod rotor;
pub mod units;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::TimeGrid;
