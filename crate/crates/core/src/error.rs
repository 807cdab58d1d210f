use thiserror::Error;

/// Errors raised by chain construction, the calculus and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvError {
    #[error("transition matrix is not square: {rows} rows, row {bad_row} has {cols} columns")]
    NotSquare { rows: usize, bad_row: usize, cols: usize },

    #[error("negative or non-finite transition probability Q({row},{col}) = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} of Q is not stochastic: sums to {sum} (residual {residual:e})")]
    NotStochastic { row: usize, sum: f64, residual: f64 },

    #[error("chain is not irreducible: state {state} is unreachable from state 0")]
    NotIrreducible { state: String },

    #[error("detailed balance fails at ({x},{y}): residual {residual:e}")]
    NotReversible { x: String, y: String, residual: f64 },

    #[error("stationary vector is invalid: {reason}")]
    InvalidStationary { reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("negative input to mean: ({r}, {s})")]
    NegativeInput { r: f64, s: f64 },

    #[error("outside the domain of the mean: {0}")]
    DomainError(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("eps = {eps} is not below the initial distance {initial}; the mixing time is 0")]
    EpsTooLarge { eps: f64, initial: f64 },

    #[error("chain too large for exact enumeration: {size} states (limit {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("unknown state id '{0}'")]
    UnknownState(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CurvError>;
