use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("insufficient quotients: need {needed}, have {available}")]
    InsufficientQuotients { needed: usize, available: usize },

    #[error("non-monotone growth function: {0}")]
    NonMonotone(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("construction error at n = {n}: {msg}")]
    Construction { n: u64, msg: String },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("work budget exceeded: {required} leaf visits needed, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("power iteration did not converge: spread {spread:e} after {iters} iterations")]
    NonConvergence { spread: f64, iters: usize },

    #[error("no sign change: {0}")]
    NoSignChange(String),

    #[error("estimators disagree: cylinder root {cylinder}, operator root {operator}, allowed {allowed}")]
    EstimatorDisagreement { cylinder: f64, operator: f64, allowed: f64 },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
}

impl Error {
    /// Process exit status for the CLI: 2 for precondition-type failures,
    /// 3 for budget, precision or resolution exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Syntax { .. }
            | Error::InsufficientQuotients { .. }
            | Error::NonMonotone(_)
            | Error::Precondition(_)
            | Error::Construction { .. } => 2,
            Error::Overflow(_)
            | Error::Size(_)
            | Error::BudgetExceeded { .. }
            | Error::NonConvergence { .. }
            | Error::NoSignChange(_)
            | Error::EstimatorDisagreement { .. }
            | Error::PrecisionExhausted(_) => 3,
        }
    }
}
