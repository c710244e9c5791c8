//! Problem data and solver configuration.

use crate::error::MfgError;
use crate::grid::GridFunction;
use crate::hamiltonian::{CouplingModel, HamiltonianModel};
use crate::Result;
use std::fmt;
use std::sync::Arc;

/// A function of torus coordinates, shared and immutable.
#[derive(Clone)]
pub struct Sampler(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl Sampler {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Sampler(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Sampler::new(move |_, _| c)
    }

    pub fn zero() -> Self {
        Sampler::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        (self.0)(x1, x2)
    }

    /// Pointwise node samples.
    pub fn sample_grid(&self, n_h: usize) -> Result<GridFunction> {
        GridFunction::sample(n_h, |x1, x2| self.eval(x1, x2))
    }
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Sampler")
    }
}

/// Continuous problem data: viscosity, horizon, Hamiltonian, coupling,
/// initial cost `u₀` and terminal density `m_T`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub nu: f64,
    pub horizon: f64,
    pub hamiltonian: HamiltonianModel,
    pub coupling: CouplingModel,
    pub u0: Sampler,
    pub m_t: Sampler,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(MfgError::invalid(
                "nu",
                format!("viscosity must be > 0, got {}", self.nu),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(MfgError::invalid(
                "T",
                format!("horizon must be > 0, got {}", self.horizon),
            ));
        }
        self.coupling.validate()
    }
}

/// Discretization and solver knobs for the coupled fixed-point iteration.
#[derive(Clone, Copy, Debug)]
pub struct SolveConfig {
    /// Grid points per axis.
    pub n_h: usize,
    /// Time steps (`Δt = T / n_t`).
    pub n_t: usize,
    /// Damping factor `θ ∈ (0, 1]` of the fixed-point update on `m`.
    pub damping: f64,
    /// Convergence threshold on `sup_n ‖Δm‖_{L¹}`.
    pub tol_fixed_point: f64,
    pub max_outer: usize,
    /// ℓ∞ residual tolerance of each Newton solve.
    pub tol_newton: f64,
    pub max_newton: usize,
    /// Line-search halvings allowed per Newton iteration.
    pub max_halvings: usize,
    /// Relative residual of the inner linear solves.
    pub tol_lin: f64,
    pub max_lin: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            n_h: 16,
            n_t: 16,
            damping: 0.5,
            tol_fixed_point: 1e-8,
            max_outer: 200,
            tol_newton: 1e-10,
            max_newton: 50,
            max_halvings: 30,
            tol_lin: 1e-12,
            max_lin: 20_000,
        }
    }
}

impl SolveConfig {
    pub fn with_resolution(n_h: usize, n_t: usize) -> Self {
        SolveConfig {
            n_h,
            n_t,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h < GridFunction::MIN_N_H {
            return Err(MfgError::GridTooCoarse(self.n_h));
        }
        if self.n_t == 0 {
            return Err(MfgError::invalid("n_t", "need at least one time step"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MfgError::invalid(
                "damping",
                format!("damping must lie in (0, 1], got {}", self.damping),
            ));
        }
        for (name, value) in [
            ("tol_fixed_point", self.tol_fixed_point),
            ("tol_newton", self.tol_newton),
            ("tol_lin", self.tol_lin),
        ] {
            if !(value > 0.0) {
                return Err(MfgError::invalid(
                    "tolerance",
                    format!("{name} must be > 0, got {value}"),
                ));
            }
        }
        Ok(())
    }
}
