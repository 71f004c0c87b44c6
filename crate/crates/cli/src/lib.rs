//! Command-line front end: Monte Carlo size tables, intercept tests and
//! fits on user CSV panels.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

pub use commands::{run, Cli};
pub use error::CliError;
