//! Batch front-end: instance generation, solving, self-tests and benchmark
//! sweeps. Reports are JSON; logs go to stderr.

pub mod bench;
pub mod config;
pub mod format;
pub mod report;
pub mod selftest;
pub mod solve;

use maxmin_core::error::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    /// A self-test property failed.
    #[error("{0} self-test properties failed")]
    SelftestFailed(usize),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// True for errors raised while a solve was running, as opposed to bad input.
pub fn is_solver_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::RejectionStall(_)
            | CoreError::IterationCapExceeded(_)
            | CoreError::BudgetExceeded { .. }
            | CoreError::GradientCallbackFailed(_)
            | CoreError::PreconditionViolated(_)
            | CoreError::NonFinite(_)
    )
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if is_solver_failure(e) => EXIT_SOLVER,
            CliError::SelftestFailed(_) => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        }
    }
}
