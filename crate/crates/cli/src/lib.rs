//! Driver behind the `stefan-limit` executable: config parsing, command
//! execution and output layout.
//!
//! Exit codes used by the binary: 0 pass, 1 a check failed, 2 usage or
//! config error, 3 solver or I/O failure.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, Config, ConfigErrors};
pub use run::{run, Outcome, RunError};

/// Environment variable overriding `run.parallelism`.
pub const THREADS_ENV: &str = "STEFAN_LIMIT_THREADS";
