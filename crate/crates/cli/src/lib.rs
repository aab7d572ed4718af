//! Library side of the `qinf` command-line tool: configuration, scenario
//! bundles and output formatting.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenario;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
