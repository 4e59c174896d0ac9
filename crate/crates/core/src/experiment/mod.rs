//! Configuration, record layout and the command-line workflows.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{calibrate, pipeline, reconstruct, simulate, Summary};
pub use config::RunConfig;
pub use manifest::Manifest;
