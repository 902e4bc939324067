//! Error types shared across the simulator and measure toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A state or kernel output contains NaN or infinite entries.
    #[error("non-finite state encountered{}", step_suffix(.step))]
    NonFiniteState { step: Option<usize> },

    /// Two fields or states that must be aligned have different shapes.
    #[error("mismatched shapes: {context}")]
    MismatchedShapes { context: String },

    /// Both Newton and the damped fixed-point fallback failed to reach
    /// tolerance; the step size is too large for the state magnitude.
    #[error(
        "implicit solver diverged at step {step}: residual {residual:.3e} after \
         {newton_iters} Newton + {fallback_iters} fixed-point iterations (tol {tol:.3e})"
    )]
    SolverDiverged {
        step: usize,
        residual: f64,
        newton_iters: usize,
        fallback_iters: usize,
        tol: f64,
    },

    /// Trajectory window is empty after burn-in.
    #[error("empty averaging window: trajectory length {len} <= burn-in {burn_in}")]
    EmptyWindow { len: usize, burn_in: usize },

    /// A measure with no samples was passed where one is required.
    #[error("empty measure")]
    EmptyMeasure,

    /// A study precondition on the parameters was violated.
    #[error("configuration rejected: {condition} (actual {actual}, required {required})")]
    ConfigRejected {
        condition: String,
        actual: String,
        required: String,
    },

    /// A study was requested with an empty grid.
    #[error("empty study: {context}")]
    EmptyStudy { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(m) => format!(" at step {m}"),
        None => String::new(),
    }
}

impl CoreError {
    pub fn mismatched(context: impl Into<String>) -> Self {
        CoreError::MismatchedShapes {
            context: context.into(),
        }
    }

    pub fn rejected(condition: &str, actual: impl ToString, required: impl ToString) -> Self {
        CoreError::ConfigRejected {
            condition: condition.to_string(),
            actual: actual.to_string(),
            required: required.to_string(),
        }
    }

    /// Attach a step index to errors raised inside a time loop.
    pub fn at_step(self, m: usize) -> Self {
        match self {
            CoreError::NonFiniteState { .. } => CoreError::NonFiniteState { step: Some(m) },
            CoreError::SolverDiverged {
                residual,
                newton_iters,
                fallback_iters,
                tol,
                ..
            } => CoreError::SolverDiverged {
                step: m,
                residual,
                newton_iters,
                fallback_iters,
                tol,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
