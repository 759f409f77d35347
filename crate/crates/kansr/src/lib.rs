//! Files, configuration and the `kansr` command-line tool built on
//! [`kansr_core`].

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, Result};
