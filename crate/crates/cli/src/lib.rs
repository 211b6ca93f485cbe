//! Batch sweeps of optimized key rates: configuration, execution and the
//! CSV and manifest artifacts.

pub mod config;
pub mod run;

pub use config::RunConfig;
pub use run::{run, RunOptions, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    /// Process exit code: 1 for configuration problems, 2 for failures
    /// during the run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<snstf_core::Error> for CliError {
    fn from(e: snstf_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
