//! Command-line front end for MBSFN outage maps, ABOT sweeps and kernel
//! validation.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::CliError;
