//! Files and command-line surface for the crowdirt rating models: ratings
//! CSV ingestion, persisted draws and reports, and the command functions
//! the `crowdirt` binary dispatches to.

pub mod commands;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
