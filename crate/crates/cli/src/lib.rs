//! Configuration, experiment drivers and plotting for the `plasmon` tool.

pub mod config;
pub mod experiments;
pub mod svg;

pub use config::{parse_config, ConfigError, RunConfig};
pub use experiments::{run, CliError, Experiment};
