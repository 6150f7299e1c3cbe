//! Library side of the `hnn-forge` command: config loading, suite
//! orchestration and report assembly.

pub mod config;
pub mod error;
pub mod report;

pub use config::{builtin_problem, load_config, Problem, RunConfig};
pub use error::{CliError, Result};
pub use report::{list_builtins, run, BuiltinDescriptor, ReportDocument};
