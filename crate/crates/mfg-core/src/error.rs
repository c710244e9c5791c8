//! Error type shared by all solver stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    /// Grid too coarse for the five-point stencil (neighbors must be distinct).
    #[error("grid too coarse: n_h = {0}, need n_h >= 4")]
    GridTooCoarse(usize),

    /// A parameter is outside its admissible range; the message names it.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// Newton iteration for a Bellman step failed to reach tolerance.
    #[error(
        "Newton divergence ({context}): residual {residual:.3e} after \
         {iterations} iterations ({halvings} line-search halvings)"
    )]
    NewtonDivergence {
        context: String,
        residual: f64,
        iterations: usize,
        halvings: usize,
    },

    /// An inner linear solve stalled before reaching its relative residual.
    #[error("linear solve failure ({context}): relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailure {
        context: String,
        residual: f64,
        iterations: usize,
    },

    /// A density step produced a genuinely negative value (monotonicity broken).
    #[error("negativity violation ({context}): min value {min:.3e}")]
    NegativityViolation { context: String, min: f64 },

    /// Terminal density sampler returned a negative value.
    #[error("negative density: m_T({x1:.4}, {x2:.4}) = {value:.3e}")]
    NegativeDensity { x1: f64, x2: f64, value: f64 },

    /// Fixed-point iteration hit the outer iteration cap; the best iterate
    /// is carried along so refinement studies can still use it.
    #[error("fixed point iteration exceeded max_outer = {max_outer}: last delta {delta:.3e}")]
    MaxOuterExceeded {
        max_outer: usize,
        delta: f64,
        solution: Box<crate::coupled::Solution>,
    },

    /// The dense space-time Newton oracle failed to converge.
    #[error("oracle divergence: residual {residual:.3e} after {iterations} iterations")]
    OracleDivergence { residual: f64, iterations: usize },

    /// Instance too large for the dense oracle.
    #[error("oracle size limit: {unknowns} unknowns (limit {limit}), n_h <= 6 and n_t <= 4 required")]
    OracleTooLarge { unknowns: usize, limit: usize },
}

impl MfgError {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        MfgError::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
