//! Configuration, pipeline and file formats behind the `chaincast` binary.

pub mod config;
pub mod density;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::{load, validate, ConfigError, JobConfig, Overrides, ValidJob};
pub use error::CliError;
pub use pipeline::{run, RunSummary};
