use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix norm bound violated: ‖A‖ = {norm} > 1")]
    NormBoundViolated { norm: f64 },

    #[error("movement budget exceeded: used {used} of {budget}")]
    BudgetExceeded { used: f64, budget: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("rejection sampler stalled after {0} consecutive rejections")]
    RejectionStall(usize),

    #[error("outer iteration cap of {0} exceeded")]
    IterationCapExceeded(usize),

    #[error("gradient callback failed: {0}")]
    GradientCallbackFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
