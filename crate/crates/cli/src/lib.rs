//! Configuration, orchestration and report emission for the `nobind` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod execute;
pub mod report;

pub use config::{parse_config, Command, ConfigError, Format, RunConfig};
pub use execute::{execute, verify};
pub use report::{emit, render, Check, Report};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NUMERIC: u8 = 3;
}
