//! Configuration and workflows behind the `crswf` binary.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_sweep, CliError, CliResult};
pub use config::RunConfig;
