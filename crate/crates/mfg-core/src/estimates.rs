//! A priori estimate quantities, computed as diagnostics.
//!
//! The scheme's structure yields bounds that are uniform in `h` and `Δt`:
//! a pointwise lower bound on the value function, an exact discrete energy
//! identity obtained by cross-testing the two equations, energy sums for
//! `m|∇_q g|²`, `g` and `m F(m)`, an entropy bound for the density with an
//! `|√m|_{H¹}` dissipation term, and integrability bounds on `m`, `D_h m`
//! and the discrete time derivative. The constants in those bounds are
//! existential, so nothing here asserts them: callers compare values across
//! refinement levels instead.
//!
//! Conventions: space-time sums run over the window `k = 0..N_T−1` with the
//! value gradient taken at `u^{k+1}`; the density is regularized as
//! `m̂ = m + ε` wherever a logarithm or fractional power appears (tiny
//! negative entries from finite linear-solve tolerances are clamped to zero
//! for these read-only diagnostics, never in solver state); the dual norm of
//! the time derivative uses the computable `H⁻¹` (s = 2) surrogate.

use crate::error::MfgError;
use crate::grid::{GridFunction, Trajectory};
use crate::norms::{h1_seminorm, h_minus1_norm, l2_inner};
use crate::ops::{d1_plus, d2_plus, nabla_h};
use crate::problem::ProblemSpec;
use crate::Result;
use serde::Serialize;

/// Knobs of the diagnostic report.
#[derive(Clone, Copy, Debug)]
pub struct EstimateOptions {
    /// Exponent of the density integrability sum (valid range `[1, 2)`).
    pub alpha_density: f64,
    /// Exponent of the gradient/time-derivative sums (valid range `(1, 4/3)`).
    pub alpha_gradient: f64,
    /// Entropy split parameter in `(0, ν)`; defaults to `ν/2`.
    pub eta: Option<f64>,
    /// Regularization added to the density under logarithms.
    pub eps: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            alpha_density: 1.5,
            alpha_gradient: 1.25,
            eta: None,
            eps: 1e-16,
        }
    }
}

/// Every a priori estimate quantity for one discrete solution.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagnosticsReport {
    /// `min_{i,j,n} u^n − (min u₀ − T (F̲ − max_x H(x,0))⁻)`.
    pub lower_bound_margin: f64,
    /// Relative defect of the exact discrete energy identity.
    pub duality_residual: f64,
    /// `h²Δt Σ m^k |∇_q g|²`.
    pub energy_mgq2: f64,
    /// `h²Δt Σ g`.
    pub energy_g: f64,
    /// `h²Δt Σ m^k F(m^k)`.
    pub energy_mfm: f64,
    /// `max_n h²Σ m̂ |ln m̂|`.
    pub entropy_max: f64,
    /// `Δt Σ_k |√m̂^k|²_{H¹}` (unweighted dissipation sum).
    pub sqrt_m_h1_sum: f64,
    /// `‖m‖^α_{L^α(Q)}` at `alpha_density`.
    pub m_lalpha: f64,
    /// `‖D_h m‖^α_{L^α(Q)}` at `alpha_gradient`.
    pub dhm_lalpha: f64,
    /// `Δt Σ_k ‖(m^{k+1}−m^k)/Δt‖²_{H⁻¹}` — s = 2 surrogate of the dual norm.
    pub dtm_hminus1: f64,
    /// `max_n |h²Σ m^n − 1|`.
    pub kh_worst_mass_drift: f64,
    /// `min_{n,i,j} m^n`.
    pub kh_worst_min: f64,
    pub eta: f64,
    pub eps: f64,
    pub alpha_density: f64,
    pub alpha_gradient: f64,
}

/// The three space-time energy sums.
#[derive(Clone, Copy, Debug)]
pub struct EnergySums {
    pub mgq2: f64,
    pub g_sum: f64,
    pub mfm: f64,
}

/// Entropy inequality pieces. `slack` is the implied constant
/// `LHS − RHS` and is reported, never asserted.
#[derive(Clone, Copy, Debug)]
pub struct EntropyReport {
    pub entropy_max: f64,
    /// `Δt Σ_k |√m̂^k|²_{H¹}`.
    pub sqrt_m_h1_sum: f64,
    /// `(ν − η) ·` the sum above.
    pub dissipation_lhs: f64,
    pub rhs_terminal_entropy: f64,
    /// `(1/2η) · energy_mgq2`.
    pub rhs_energy: f64,
    pub slack: f64,
}

/// Integrability quantities behind the compactness argument.
#[derive(Clone, Copy, Debug)]
pub struct CompactnessReport {
    pub m_lalpha: f64,
    pub dhm_lalpha: f64,
    pub dtm_hminus1: f64,
}

/// Clamps the read-only tiny negatives of a computed density slice and
/// restores its mass, for diagnostics that take logs or fractional powers.
fn clamped_density(m: &GridFunction) -> GridFunction {
    let min = m.min();
    if min >= 0.0 {
        return m.clone();
    }
    let mass_before = m.mass();
    let clamped = m.map(|v| v.max(0.0));
    let mass_after = clamped.mass();
    if mass_before > 0.0 && mass_after > 0.0 {
        clamped.scale(mass_before / mass_after)
    } else {
        clamped
    }
}

/// Margin of the pointwise lower bound on the value function:
/// nonnegative (up to solver tolerance) for any computed solution. The
/// bound `min u₀ − T (F̲ − max_x H(x,0))⁻` is built from the problem data,
/// so shifting a trajectory moves the margin one-for-one.
pub fn lower_bound_margin(u: &Trajectory, problem: &ProblemSpec) -> Result<f64> {
    let hamiltonian = problem.hamiltonian.sample_on_grid(u.n_h())?;
    let f_lower = problem.coupling.lower_bound();
    let max_h0 = hamiltonian.max_h_at_zero();
    let neg_part = (-(f_lower - max_h0)).max(0.0);
    let u0_min = problem.u0.sample_grid(u.n_h())?.min();
    let bound = u0_min - problem.horizon * neg_part;
    let global_min = u
        .slices()
        .iter()
        .map(|s| s.min())
        .fold(f64::INFINITY, f64::min);
    Ok(global_min - bound)
}

/// Relative defect of the exact discrete energy identity: with
/// `m̄_T = max m^{N_T}` and `e^n = u^n − n Δt F(m̄_T)`,
///
/// ```text
///   h²Δt Σ_k Σ m^k (g_q·[∇_h u^{k+1}] − g)
///   + h²Δt Σ_k Σ m̄_T g
///   + h²Δt Σ_k Σ (m^k − m̄_T)(F(m^k) − F(m̄_T))
///   = (m^{N_T} − m̄_T, e^{N_T})_{L²} − (m⁰ − m̄_T, u⁰)_{L²}.
/// ```
///
/// Near zero for discrete solutions; O(perturbation) otherwise, which makes
/// it a detector for non-solutions.
pub fn duality_residual(u: &Trajectory, m: &Trajectory, problem: &ProblemSpec) -> Result<f64> {
    assert_eq!(u.n_t(), m.n_t());
    assert_eq!(u.n_h(), m.n_h());
    let n = u.n_h();
    let n_t = u.n_t();
    let dt = u.dt();
    let h2 = 1.0 / (n * n) as f64;
    let hamiltonian = problem.hamiltonian.sample_on_grid(n)?;
    let m_bar = m.slice(n_t).max();
    let f_bar = problem.coupling.eval(m_bar);

    let mut lhs = 0.0;
    for k in 0..n_t {
        let grad = nabla_h(u.slice(k + 1));
        let m_k = m.slice(k).values();
        let mut slice_sum = 0.0;
        for idx in 0..n * n {
            let (i, j) = (idx / n, idx % n);
            let q = grad.values()[idx];
            let g = hamiltonian.eval((i, j), q);
            let dg = hamiltonian.grad((i, j), q);
            let gq_dot_q = dg[0] * q[0] + dg[1] * q[1] + dg[2] * q[2] + dg[3] * q[3];
            let f_m = problem.coupling.eval(m_k[idx]);
            slice_sum += m_k[idx] * (gq_dot_q - g)
                + m_bar * g
                + (m_k[idx] - m_bar) * (f_m - f_bar);
        }
        lhs += h2 * dt * slice_sum;
    }

    let ones = GridFunction::constant(n, 1.0)?;
    let terminal_weight = u
        .slice(n_t)
        .axpy(-problem.horizon * f_bar, &ones);
    let rhs = l2_inner(&m.slice(n_t).axpy(-m_bar, &ones), &terminal_weight)
        - l2_inner(&m.slice(0).axpy(-m_bar, &ones), u.slice(0));

    Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
}

/// The three space-time energy sums over `k = 0..N_T−1`.
pub fn energy_sums(u: &Trajectory, m: &Trajectory, problem: &ProblemSpec) -> Result<EnergySums> {
    assert_eq!(u.n_t(), m.n_t());
    assert_eq!(u.n_h(), m.n_h());
    let n = u.n_h();
    let dt = u.dt();
    let h2 = 1.0 / (n * n) as f64;
    let hamiltonian = problem.hamiltonian.sample_on_grid(n)?;
    let (mut mgq2, mut g_sum, mut mfm) = (0.0, 0.0, 0.0);
    for k in 0..u.n_t() {
        let grad = nabla_h(u.slice(k + 1));
        let m_k = m.slice(k).values();
        for idx in 0..n * n {
            let (i, j) = (idx / n, idx % n);
            let q = grad.values()[idx];
            let dg = hamiltonian.grad((i, j), q);
            let dg2 = dg[0] * dg[0] + dg[1] * dg[1] + dg[2] * dg[2] + dg[3] * dg[3];
            mgq2 += h2 * dt * m_k[idx] * dg2;
            g_sum += h2 * dt * hamiltonian.eval((i, j), q);
            mfm += h2 * dt * m_k[idx] * problem.coupling.eval(m_k[idx]);
        }
    }
    Ok(EnergySums { mgq2, g_sum, mfm })
}

/// Entropy bound pieces with split parameter `η ∈ (0, ν)` and
/// regularization `m̂ = m + ε`.
pub fn entropy_report(
    u: &Trajectory,
    m: &Trajectory,
    problem: &ProblemSpec,
    eta: f64,
    eps: f64,
) -> Result<EntropyReport> {
    if !(eta > 0.0 && eta < problem.nu) {
        return Err(MfgError::invalid(
            "eta",
            format!("entropy split must lie in (0, nu) = (0, {}), got {eta}", problem.nu),
        ));
    }
    let n = m.n_h();
    let h2 = 1.0 / (n * n) as f64;
    let dt = m.dt();

    let entropy_of = |slice: &GridFunction| -> f64 {
        let hat = clamped_density(slice).map(|v| v + eps);
        h2 * hat
            .values()
            .iter()
            .map(|&v| v * v.ln().abs())
            .sum::<f64>()
    };
    let entropy_max = m
        .slices()
        .iter()
        .map(entropy_of)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut h1_sum = 0.0;
    for k in 0..m.n_t() {
        let sqrt_hat = clamped_density(m.slice(k)).map(|v| (v + eps).sqrt());
        let seminorm = h1_seminorm(&sqrt_hat);
        h1_sum += dt * seminorm * seminorm;
    }

    let rhs_terminal_entropy = entropy_of(m.slice(m.n_t()));
    let energy = energy_sums(u, m, problem)?;
    let rhs_energy = energy.mgq2 / (2.0 * eta);
    let dissipation_lhs = (problem.nu - eta) * h1_sum;
    Ok(EntropyReport {
        entropy_max,
        sqrt_m_h1_sum: h1_sum,
        dissipation_lhs,
        rhs_terminal_entropy,
        rhs_energy,
        slack: (entropy_max + dissipation_lhs) - (rhs_terminal_entropy + rhs_energy),
    })
}

/// `‖m‖^α_{L^α(Q)}` over the window `k = 0..N_T−1`, valid for `α ∈ [1, 2)`.
pub fn density_lalpha(m: &Trajectory, alpha: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&alpha) {
        return Err(MfgError::invalid(
            "alpha",
            format!("density exponent must lie in [1, 2), got {alpha}"),
        ));
    }
    let n = m.n_h();
    let h2 = 1.0 / (n * n) as f64;
    let mut sum = 0.0;
    for k in 0..m.n_t() {
        let hat = clamped_density(m.slice(k));
        sum += m.dt()
            * h2
            * hat
                .values()
                .iter()
                .map(|&v| v.powf(alpha))
                .sum::<f64>();
    }
    Ok(sum)
}

/// Gradient and time-derivative integrability at `α ∈ (1, 4/3)`, plus the
/// density sum at the same exponent.
pub fn compactness_report(m: &Trajectory, alpha: f64) -> Result<CompactnessReport> {
    if !(alpha > 1.0 && alpha < 4.0 / 3.0) {
        return Err(MfgError::invalid(
            "alpha",
            format!("compactness exponent must lie in (1, 4/3), got {alpha}"),
        ));
    }
    let n = m.n_h();
    let h2 = 1.0 / (n * n) as f64;
    let dt = m.dt();

    let m_lalpha = density_lalpha(m, alpha)?;

    let mut dhm = 0.0;
    for k in 0..m.n_t() {
        let d1 = d1_plus(m.slice(k));
        let d2 = d2_plus(m.slice(k));
        dhm += dt
            * h2
            * d1.values()
                .iter()
                .zip(d2.values())
                .map(|(a, b)| (a * a + b * b).powf(alpha / 2.0))
                .sum::<f64>();
    }

    let mut dtm = 0.0;
    for k in 0..m.n_t() {
        let diff = m.slice(k + 1).sub(m.slice(k)).scale(1.0 / dt);
        let dual = h_minus1_norm(&diff)?;
        dtm += dt * dual * dual;
    }

    Ok(CompactnessReport {
        m_lalpha,
        dhm_lalpha: dhm,
        dtm_hminus1: dtm,
    })
}

/// Probability-simplex membership: worst mass drift and worst minimum
/// over all slices (raw values, no clamping).
pub fn kh_membership(m: &Trajectory) -> (f64, f64) {
    let worst_mass_drift = m
        .slices()
        .iter()
        .map(|s| (s.mass() - 1.0).abs())
        .fold(0.0, f64::max);
    let worst_min = m
        .slices()
        .iter()
        .map(|s| s.min())
        .fold(f64::INFINITY, f64::min);
    (worst_mass_drift, worst_min)
}

impl DiagnosticsReport {
    /// Computes every estimate quantity for one discrete solution.
    pub fn compute(
        u: &Trajectory,
        m: &Trajectory,
        problem: &ProblemSpec,
        options: &EstimateOptions,
    ) -> Result<Self> {
        let eta = options.eta.unwrap_or(problem.nu / 2.0);
        let energy = energy_sums(u, m, problem)?;
        let entropy = entropy_report(u, m, problem, eta, options.eps)?;
        let m_lalpha = density_lalpha(m, options.alpha_density)?;
        let compactness = compactness_report(m, options.alpha_gradient)?;
        let (kh_worst_mass_drift, kh_worst_min) = kh_membership(m);
        let report = DiagnosticsReport {
            lower_bound_margin: lower_bound_margin(u, problem)?,
            duality_residual: duality_residual(u, m, problem)?,
            energy_mgq2: energy.mgq2,
            energy_g: energy.g_sum,
            energy_mfm: energy.mfm,
            entropy_max: entropy.entropy_max,
            sqrt_m_h1_sum: entropy.sqrt_m_h1_sum,
            m_lalpha,
            dhm_lalpha: compactness.dhm_lalpha,
            dtm_hminus1: compactness.dtm_hminus1,
            kh_worst_mass_drift,
            kh_worst_min,
            eta,
            eps: options.eps,
            alpha_density: options.alpha_density,
            alpha_gradient: options.alpha_gradient,
        };
        debug_assert!(report.all_finite(), "non-finite diagnostic: {report:?}");
        Ok(report)
    }

    pub fn all_finite(&self) -> bool {
        [
            self.lower_bound_margin,
            self.duality_residual,
            self.energy_mgq2,
            self.energy_g,
            self.energy_mfm,
            self.entropy_max,
            self.sqrt_m_h1_sum,
            self.m_lalpha,
            self.dhm_lalpha,
            self.dtm_hminus1,
            self.kh_worst_mass_drift,
            self.kh_worst_min,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}
