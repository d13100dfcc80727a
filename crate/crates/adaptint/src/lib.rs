//! Command-line front end for `adaptint-core`: TOML experiment configs, CSV
//! and JSON file formats, and the `simulate`, `fit`, `evaluate`, `regret` and
//! `dr` subcommands.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod run;

pub use config::LoadedConfig;
pub use error::{CliError, Result};
pub use run::{Run, Subcommand};
