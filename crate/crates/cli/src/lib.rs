//! Batch front end: game files, commands, caching and CSV output.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod verify;

pub use cache::Outcome;
pub use commands::run;
pub use config::{Command, RunConfig};
pub use error::{Error, Result};
