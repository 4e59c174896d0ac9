//! Simulation of direct-detection measurements of pulsed classical light and
//! reconstruction of its Wigner function from detected-photon statistics.

pub mod calibration;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod field_states;
pub mod photon_statistics;
pub mod quadrature;
pub mod special;
pub mod wigner;

pub use error::{Error, Result};
