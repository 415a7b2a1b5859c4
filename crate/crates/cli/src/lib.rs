//! Command-line harness: argument parsing, layered configuration, CSV and
//! SVG emission, and the validation report.

pub mod args;
pub mod commands;
pub mod error;
pub mod plot;
pub mod settings;
pub mod table;
pub mod validate;

pub use args::{parse_args, CommandKind, ExperimentSpec};
pub use commands::execute;
pub use error::{CliError, Result};
