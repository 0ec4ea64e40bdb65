//! Batch front end: reads a JSON run configuration, dispatches one command
//! and writes CSV/JSON artifacts to an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::CliError;
