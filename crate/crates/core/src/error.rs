use thiserror::Error;

pub type Result<T> = std::result::Result<T, FinslerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinslerError {
    #[error("wind is not admissible: h(W,W) = {norm_sq} at {at:?} (limit {limit})")]
    NonConvexWind { norm_sq: f64, limit: f64, at: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fundamental tensor is undefined on the zero vector")]
    ZeroVector,

    #[error("fundamental tensor is numerically singular")]
    SingularTensor,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("point {at:?} is critical: |df| = {df_norm:e}")]
    CriticalPoint { at: Vec<f64>, df_norm: f64 },

    #[error("point {at:?} is not critical: |df| = {df_norm:e}")]
    NotCritical { at: Vec<f64>, df_norm: f64 },

    #[error("trajectory left the chart domain at t = {time} ({at:?})")]
    LeftDomain { time: f64, at: Vec<f64> },

    #[error("level {target} was never reached: {reason}")]
    NeverReached { target: f64, reason: String },

    #[error("sample set is empty")]
    EmptySample,

    #[error("interval [{c}, {d}] contains the critical value {value}")]
    IntervalContainsCriticalValue { c: f64, d: f64, value: f64 },

    #[error("no critical point found from {seeds} seeds")]
    NoCriticalPoint { seeds: usize },

    #[error("level {level} not found in the domain")]
    LevelNotFound { level: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("evaluation failed: {0}")]
    Eval(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FinslerError {
    /// Errors that come from bad input rather than from the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            FinslerError::Parse { .. }
                | FinslerError::Validation(_)
                | FinslerError::DimensionMismatch { .. }
                | FinslerError::InvalidArgument(_)
                | FinslerError::NonConvexWind { .. }
        )
    }
}
