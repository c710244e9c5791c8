//! Discrete norms, semi-norms and the H⁻¹ dual norm.
//!
//! ```text
//!   ‖v‖_{L^s}   = (h² Σ |v|^s)^{1/s}
//!   |v|_{W^{1,s}} = (h² Σ ((D₁⁺v)² + (D₂⁺v)²)^{s/2})^{1/s}
//!   ‖w‖_{L^s(Q)} = (Δt Σ_n ‖w^n‖^s_{L^s})^{1/s}
//! ```
//!
//! The dual norm is implemented for the Hilbert case only: by duality of the
//! quadratic form, `‖v‖_{H⁻¹} = √⟨v, w⟩` with `(I − Δ_h) w = v`. Other
//! exponents are rejected; the `W^{−1,α}` quantities elsewhere in the crate
//! use this `s = 2` surrogate.
//!
//! All reductions run in fixed row-major order.

use crate::error::MfgError;
use crate::grid::{GridFunction, Trajectory};
use crate::ops::{d1_plus, d2_plus};
use crate::sparse::{conjugate_gradient, StencilMatrix};
use crate::Result;
use std::ops::RangeInclusive;

fn check_exponent(s: f64) -> Result<()> {
    if !(s >= 1.0) {
        return Err(MfgError::invalid(
            "s",
            format!("L^s exponent must satisfy s >= 1, got {s}"),
        ));
    }
    Ok(())
}

/// Discrete L² inner product `h² Σ v w`.
pub fn l2_inner(v: &GridFunction, w: &GridFunction) -> f64 {
    assert_eq!(v.n_h(), w.n_h());
    let h2 = v.h() * v.h();
    h2 * v
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
}

/// `‖v‖_{L^s}` for `s ∈ [1, ∞)`.
pub fn lp_norm(v: &GridFunction, s: f64) -> Result<f64> {
    check_exponent(s)?;
    let h2 = v.h() * v.h();
    let sum: f64 = if s == 1.0 {
        v.values().iter().map(|x| x.abs()).sum()
    } else if s == 2.0 {
        v.values().iter().map(|x| x * x).sum()
    } else {
        v.values().iter().map(|x| x.abs().powf(s)).sum()
    };
    Ok((h2 * sum).powf(1.0 / s))
}

/// `|v|_{W^{1,s}}` built from the two forward differences.
pub fn w1s_seminorm(v: &GridFunction, s: f64) -> Result<f64> {
    check_exponent(s)?;
    let d1 = d1_plus(v);
    let d2 = d2_plus(v);
    let h2 = v.h() * v.h();
    let sum: f64 = d1
        .values()
        .iter()
        .zip(d2.values())
        .map(|(a, b)| {
            let g2 = a * a + b * b;
            if s == 2.0 {
                g2
            } else {
                g2.powf(s / 2.0)
            }
        })
        .sum();
    Ok((h2 * sum).powf(1.0 / s))
}

/// `|v|_{H¹} = |v|_{W^{1,2}}`.
pub fn h1_seminorm(v: &GridFunction) -> f64 {
    w1s_seminorm(v, 2.0).expect("s = 2 is always valid")
}

/// Relative residual of the `(I − Δ_h)` solve behind the H⁻¹ norm.
pub const H_MINUS1_TOL: f64 = 1e-12;

/// `‖v‖_{H⁻¹} = √⟨v, (I − Δ_h)⁻¹ v⟩`, solved by conjugate gradient.
pub fn h_minus1_norm(v: &GridFunction) -> Result<f64> {
    let n = v.n_h();
    let inv_h2 = (n * n) as f64;
    let operator = StencilMatrix::assemble(n, |_, _, row| {
        row[0] = 1.0 + 4.0 * inv_h2;
        for entry in row[1..].iter_mut() {
            *entry = -inv_h2;
        }
    });
    let mut w = vec![0.0; n * n];
    let max_iterations = 100 * n * n;
    let stats = conjugate_gradient(
        |p, out| operator.matvec(p, out),
        v.values(),
        &mut w,
        H_MINUS1_TOL,
        max_iterations,
    );
    if !stats.converged {
        return Err(MfgError::LinearSolveFailure {
            context: "(I - laplace_h) solve for the H^-1 norm".into(),
            residual: stats.relative_residual,
            iterations: stats.iterations,
        });
    }
    let wg = GridFunction::new(n, w)?;
    Ok(l2_inner(v, &wg).max(0.0).sqrt())
}

/// `‖w‖_{L^s(Q)}` over a window of time indices.
pub fn space_time_norm(traj: &Trajectory, s: f64, window: RangeInclusive<usize>) -> Result<f64> {
    check_exponent(s)?;
    assert!(
        *window.end() <= traj.n_t(),
        "time window end {} out of range 0..={}",
        window.end(),
        traj.n_t()
    );
    let mut sum = 0.0;
    for n in window {
        sum += lp_norm(traj.slice(n), s)?.powf(s);
    }
    Ok((traj.dt() * sum).powf(1.0 / s))
}

/// Both sides of the discrete Sobolev inequality, constant omitted:
/// `(‖v‖_{L^s}, ‖v‖_{L²} + |v|_{H¹})`.
pub fn sobolev_check(v: &GridFunction, s: f64) -> Result<(f64, f64)> {
    let lhs = lp_norm(v, s)?;
    let rhs = lp_norm(v, 2.0)? + h1_seminorm(v);
    Ok((lhs, rhs))
}
