//! Command-line front end: config files with dotted keys, the `solve`,
//! `curve` and `verify` subcommands, and CSV/JSON reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 failed verification.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use cli::run;
pub use commands::{cmd_curve, cmd_solve, cmd_verify, CurveOutput, CurveRow, CurveTable, SolveSummary, VerifyReport};
pub use config::{FlatConfig, Format, RunConfig};
pub use error::{CliError, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFICATION};
