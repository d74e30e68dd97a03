use thiserror::Error;

/// Failure while evaluating problem functions.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("non-finite value in {what} at component {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Errors raised by the solver layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("the mixed-integer set is empty (no point satisfies its rows, bounds and integrality)")]
    EmptySet,
    #[error("point lies outside the convex set at component {index} (value {value}, bounds [{lower}, {upper}])")]
    OutsideSet {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("MILP solve failed: {0}")]
    Milp(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
