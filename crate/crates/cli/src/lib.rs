//! Batch front end: configuration parsing and command dispatch.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Outcome, Status};
pub use config::{load_config, parse_config, RunConfig, ValidationError};
