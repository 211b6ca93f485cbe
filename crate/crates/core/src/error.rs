use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid protocol parameter: {0}")]
    Params(String),

    #[error("invalid channel model: {0}")]
    Channel(String),

    #[error("invalid security parameter: {0}")]
    Security(String),

    #[error("invalid counts table: {0}")]
    Counts(String),

    #[error("concentration bound failed: {0}")]
    Bound(String),

    #[error("failure budget exhausted: {used} of {allocated} allocations drawn")]
    BudgetExhausted { used: usize, allocated: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("empty scan range")]
    EmptyScanRange,

    #[error("infeasible search specification: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;
