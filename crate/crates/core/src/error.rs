use thiserror::Error;

use crate::minimax::SaddleResult;
use crate::nonrevealing::NrLimit;
use crate::table::ValueTable;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not stochastic: row {row} {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("chain has transient states {states:?}")]
    TransientState { states: Vec<usize> },

    #[error("chain is periodic with period {period}; lift it before use")]
    PeriodicChain { period: usize },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("validation failed for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("saddle tolerance not reached (gap {:.3e})", .0.gap)]
    ToleranceNotReached(Box<SaddleResult>),

    #[error("fixed-point iteration did not converge (residuals {residual_vex:.3e}, {residual_cav:.3e})")]
    NotConverged {
        last: Box<ValueTable>,
        residual_vex: f64,
        residual_cav: f64,
    },

    #[error("limit estimate did not reach tolerance (last increment {:.3e})", .0.increment)]
    LimitNotReached(Box<NrLimit>),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("weights and atoms do not recombine to the target belief (error {0:.3e})")]
    BadCombination(f64),

    #[error("belief is not on the requested fiber (class-mass error {0:.3e})")]
    FiberMismatch(f64),

    #[error("measure is not in H(p): {0}")]
    NotInH(String),
}
