//! Experiment harness for superiorized CT reconstruction: run configuration,
//! shipped presets, batch simulation and reconstruction, and reporting.

pub mod commands;
pub mod config;
pub mod error;
pub mod harness;
pub mod presets;
pub mod report;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
