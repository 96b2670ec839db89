//! Configuration, experiment runner and verification suites behind the
//! `peel` command-line tool.

pub mod config;
pub mod error;
pub mod presets;
pub mod runner;
pub mod svg;
pub mod verify;

pub use config::{parse_config, ExperimentConfig};
pub use error::CliError;
pub use runner::run_experiment;
