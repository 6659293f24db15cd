//! Batch orchestration behind the `roundtable` binary: run simulations,
//! compute metrics and linguistics, evaluate stopping rules.

pub mod analyze;
pub mod run;
pub mod simrecords;
pub mod stopping;

use std::process::ExitCode;

pub use analyze::{cmd_analyze, AnalyzeArgs};
pub use run::{cmd_run, RunManifest};
pub use stopping::{cmd_stopping, StoppingArgs};

/// Command failures mapped onto the exit-code contract:
/// 0 success, 1 validation error, 2 runtime/provider failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    pub fn runtime(error: impl std::fmt::Display) -> Self {
        CliError::Runtime(error.to_string())
    }
}
