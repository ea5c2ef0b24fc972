//! Command-line front end: built-in maps, one subcommand per analysis, and
//! the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod mapspec;

pub use commands::{run, Command, Report};
pub use config::RunConfig;
pub use error::CliError;
