//! Configuration, record files and subcommands of the `mmw-mec` simulator.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

pub use config::{parse_config, ConfigError, RunConfig};
pub use manifest::RunManifest;
pub use output::{emit, parse_csv, parse_json, Format, OutputRecord};
