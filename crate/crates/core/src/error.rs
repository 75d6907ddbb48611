use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("p must be ≥ 2 (got {0})")]
    InvalidExponent(f64),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("zero vector has no norming functional")]
    ZeroVector,

    #[error("dictionary column {0} is zero")]
    ZeroColumn(usize),

    #[error("dictionary columns {0} and {1} are identical")]
    DuplicateColumns(usize, usize),

    #[error("dictionary column {index} has norm {norm}, expected 1")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("dictionary must contain at least {needed} atoms")]
    TooFewAtoms { needed: usize },

    #[error("operation requires p = 2 (got p = {0})")]
    RequiresHilbert(f64),

    #[error("combinatorial budget exceeded: {needed} evaluations > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid sparse signal: {0}")]
    InvalidSignal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("selected atoms are linearly dependent")]
    DegenerateSystem,

    #[error("inner solver did not converge after {iterations} Newton steps (first-order residual {residual:e})")]
    SolverStagnation { iterations: usize, residual: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("malformed dictionary file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
