//! Command-line driver for the `pmu-synth-core` pipeline: configuration,
//! dataset and checkpoint files, reports and plot data.

pub mod case;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;

pub use commands::run;
pub use error::{CliError, CliResult};
