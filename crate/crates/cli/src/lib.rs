//! Configuration, orchestration and output for the `weakkam` command.

pub mod config;
pub mod report;
pub mod run;

use thiserror::Error;

pub use config::{Command, RunConfig};
pub use report::{write_outputs, RunReport};
pub use run::{run, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Config(_) => 2,
            CliError::Write { .. } => 1,
        }
    }
}
