//! Configuration and command pipelines behind the `kfpness` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{run_command, Command, Outcome};
pub use config::{parse_config, parse_config_str, RunConfig, Setup};
