//! Command-line front end: configuration parsing, the subcommands and their
//! artifacts, and the invariant suite behind `check`.

pub mod checks;
pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, RunError, Subcommand};
