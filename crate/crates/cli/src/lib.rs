//! Library side of the `quilt` binary: argument types, subcommand bodies,
//! the sweep harness and SVG output.

pub mod args;
pub mod commands;
pub mod exit;
pub mod run;
pub mod svg;
pub mod sweep;

pub use exit::{exit_code, CliError};
