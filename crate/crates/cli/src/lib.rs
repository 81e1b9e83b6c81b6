//! Batch driver: TOML configs, run directories and the five subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;

pub use commands::{cmd_decay, cmd_energy, cmd_exhaust, cmd_solve, cmd_verify, Console};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
