//! Command-line front end for `stickpost`: resolves a run configuration from
//! flags and an optional TOML file, runs a verification suite or a sampler,
//! and writes JSON or CSV reports plus optional ECDF plot data.
//!
//! Exit status is 0 when every verdict passes, 1 when any fails, and 2 on a
//! configuration, sampling or I/O error.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{Command, OutputFormat, RunConfig, Settings};
pub use error::{CliError, Result};
pub use run::{execute, run, Outcome, Payload, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
