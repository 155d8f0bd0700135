//! Command-line front end: configuration, experiment dispatch and CSV/text
//! output for the `lagrangekit` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;

pub use commands::{dispatch, Outcome};
pub use config::{resolve, Command, FileConfig, Flags, RunConfig};
pub use error::CliError;
