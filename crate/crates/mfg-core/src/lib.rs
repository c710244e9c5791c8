//! Finite difference solver for a mean field games system on the 2-D torus.
//!
//! The model is a coupled pair of PDEs on (0,T) × T² for a value function `u`
//! and a density `m`:
//!
//! ```text
//!   ∂ₜu − ν Δu + H(x, ∇u) = F(m)          (forward, u(0,·) = u₀)
//!   ∂ₜm + ν Δm + div(m Hₚ(x, ∇u)) = 0     (backward, m(T,·) = m_T)
//! ```
//!
//! The discretization lives on a uniform periodic grid: a monotone numerical
//! Hamiltonian `g(x, q₁, q₂, q₃, q₄)` built from the four one-sided
//! differences, a semi-implicit Euler sweep for the value function, and an
//! implicit step for the density whose transport operator is, by
//! construction, the adjoint of the linearized value-function operator. That
//! adjoint structure is what makes the discrete system inherit the energy
//! identities and a priori bounds of the continuous one; the [`estimates`]
//! module computes those quantities as runnable diagnostics.
//!
//! The crate is organized around the solver pipeline:
//!
//! * [`grid`], [`ops`], [`norms`] — grid functions, elementary difference
//!   operators, discrete norms and the H⁻¹ dual norm;
//! * [`hamiltonian`] — numerical Hamiltonian models and axiom validators;
//! * [`bellman`], [`fokker_planck`] — the two single-equation sweeps;
//! * [`coupled`] — the damped fixed-point iteration for the full system and
//!   a dense-Newton oracle for small instances;
//! * [`estimates`] — diagnostic report with the discrete energy, entropy and
//!   compactness quantities.
//!
//! With the default `parallel` feature, element-wise kernels (stencils,
//! residual and matrix assembly) run on rayon; all reductions stay in fixed
//! sequential order so results are bit-identical across thread counts.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values;
// `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several same-length arrays by node; an indexed loop
// is the clearer form for those.
#![allow(clippy::needless_range_loop)]

pub mod bellman;
pub mod coupled;
pub mod error;
pub mod estimates;
pub mod exec;
pub mod fokker_planck;
pub mod grid;
pub mod hamiltonian;
pub mod norms;
pub mod ops;
pub mod oracle;
pub mod problem;
pub mod sparse;

pub use error::MfgError;
pub use grid::{GridFunction, Trajectory, VectorField4};
pub use hamiltonian::{CouplingModel, HamiltonianModel, SampledHamiltonian};
pub use problem::{ProblemSpec, Sampler, SolveConfig};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MfgError>;
