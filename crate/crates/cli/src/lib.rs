//! Experiment runner for strip-lab: config parsing, dispatch, CSV and SVG
//! output, run manifests, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod table;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, CliResult};
pub use manifest::{run, RunManifest, RunOptions};
