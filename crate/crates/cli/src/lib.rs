//! Experiment front end: declarative TOML configs, one subcommand per
//! study, CSV/JSON emission with atomic writes, and cached-reference
//! management.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod setup;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
