//! Backward sweep for the density.
//!
//! The transport operator is the discrete divergence of `m ∇_q g`, defined
//! through summation by parts so that for every test grid function `w`
//!
//! ```text
//!   h² Σ 𝒯_{i,j}(u, m) w_{i,j}
//!     = −h² Σ m_{i,j} ∇_q g(x_{i,j}, [∇_h u]_{i,j}) · [∇_h w]_{i,j}.
//! ```
//!
//! Spelled out, `𝒯` is the eight-term divergence form
//!
//! ```text
//!   𝒯_{i,j}(u,m) = (1/h) ( m_{i,j} ∂₁g(i,j)   − m_{i−1,j} ∂₁g(i−1,j)
//!                        + m_{i+1,j} ∂₂g(i+1,j) − m_{i,j} ∂₂g(i,j)
//!                        + m_{i,j} ∂₃g(i,j)   − m_{i,j−1} ∂₃g(i,j−1)
//!                        + m_{i,j+1} ∂₄g(i,j+1) − m_{i,j} ∂₄g(i,j) )
//! ```
//!
//! with `∂_k g(i,j) = ∂g/∂q_k (x_{i,j}, [∇_h u]_{i,j})`. This makes
//! `m ↦ −ν Δ_h m − 𝒯(u, m)` the adjoint of the linearized value-function
//! operator `w ↦ −ν Δ_h w + ∇_q g(x, [∇_h u]) · [∇_h w]`, which is the
//! structural property the whole scheme rests on ([`adjoint_check`]
//! measures it directly).
//!
//! Each backward step solves the linear system `A m^n = m^{n+1}` with
//! `A = I − Δt ν Δ_h − Δt 𝒯(u^{n+1}, ·)`. Under (g1), `A` is an M-matrix
//! with unit column sums: the step conserves mass and preserves
//! nonnegativity up to solver tolerance.

use crate::grid::{GridFunction, Trajectory};
use crate::hamiltonian::SampledHamiltonian;
use crate::norms::l2_inner;
use crate::ops::{laplace_h, nabla_h, wrap_dec, wrap_inc};
use crate::problem::{ProblemSpec, SolveConfig, Sampler};
use crate::sparse::{bicgstab, StencilMatrix};
use crate::Result;
use crate::{exec, MfgError};

/// Convergence and admissibility record of one backward step.
#[derive(Clone, Copy, Debug)]
pub struct FpStepReport {
    pub linear_iterations: usize,
    pub residual: f64,
    pub min_value: f64,
    pub mass: f64,
}

/// `∂g/∂q_k` evaluated at every node for the gradient field of `u`.
pub(crate) fn transport_coefficients(
    u: &GridFunction,
    hamiltonian: &SampledHamiltonian,
) -> Vec<[f64; 4]> {
    let n = u.n_h();
    let grad = nabla_h(u);
    let grad_values = grad.values();
    let mut out = vec![[0.0; 4]; n * n];
    exec::fill(&mut out, |k| {
        hamiltonian.grad((k / n, k % n), grad_values[k])
    });
    out
}

fn transport_from_coefficients(coeffs: &[[f64; 4]], m: &GridFunction) -> GridFunction {
    let n = m.n_h();
    let inv_h = n as f64;
    let mut out = m.clone();
    let mv = m.values();
    exec::fill(out.values_mut(), |k| {
        let (i, j) = (k / n, k % n);
        let (ip, im) = (wrap_inc(i, n), wrap_dec(i, n));
        let (jp, jm) = (wrap_inc(j, n), wrap_dec(j, n));
        let d = coeffs[k];
        let d_im = coeffs[im * n + j];
        let d_ip = coeffs[ip * n + j];
        let d_jm = coeffs[i * n + jm];
        let d_jp = coeffs[i * n + jp];
        inv_h
            * (mv[k] * d[0] - mv[im * n + j] * d_im[0]
                + mv[ip * n + j] * d_ip[1]
                - mv[k] * d[1]
                + mv[k] * d[2]
                - mv[i * n + jm] * d_jm[2]
                + mv[i * n + jp] * d_jp[3]
                - mv[k] * d[3])
    });
    out
}

/// The transport operator `𝒯(u, m)`, assembled matrix-free.
pub fn transport(
    u: &GridFunction,
    m: &GridFunction,
    hamiltonian: &SampledHamiltonian,
) -> GridFunction {
    assert_eq!(u.n_h(), m.n_h());
    assert_eq!(u.n_h(), hamiltonian.n_h());
    let coeffs = transport_coefficients(u, hamiltonian);
    transport_from_coefficients(&coeffs, m)
}

/// Relative defect of the adjoint identity
/// `⟨−νΔ_h m − 𝒯(u,m), w⟩ = ⟨m, −νΔ_h w + ∇_q g(x,[∇_h u])·[∇_h w]⟩`.
pub fn adjoint_check(
    u: &GridFunction,
    m: &GridFunction,
    w: &GridFunction,
    problem: &ProblemSpec,
) -> Result<f64> {
    let n = u.n_h();
    let hamiltonian = problem.hamiltonian.sample_on_grid(n)?;
    let nu = problem.nu;

    let fp_side = laplace_h(m)
        .scale(-nu)
        .sub(&transport(u, m, &hamiltonian));
    let lhs = l2_inner(&fp_side, w);

    let coeffs = transport_coefficients(u, &hamiltonian);
    let grad_w = nabla_h(w);
    let lap_w = laplace_h(w);
    let mut linearized = w.clone();
    let (grad_w_values, lap_w_values) = (grad_w.values(), lap_w.values());
    exec::fill(linearized.values_mut(), |k| {
        let d = coeffs[k];
        let q = grad_w_values[k];
        -nu * lap_w_values[k] + d[0] * q[0] + d[1] * q[1] + d[2] * q[2] + d[3] * q[3]
    });
    let rhs = l2_inner(m, &linearized);

    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    Ok((lhs - rhs).abs() / scale)
}

/// Assembles `A = I − Δt ν Δ_h − Δt 𝒯(u_next, ·)` and asserts its M-matrix
/// sign pattern entrywise.
fn assemble_fp_matrix(coeffs: &[[f64; 4]], n: usize, nu: f64, dt: f64) -> StencilMatrix {
    let inv_h = n as f64;
    let inv_h2 = (n * n) as f64;
    let a = StencilMatrix::assemble(n, |i, j, row| {
        let (ip, im) = (wrap_inc(i, n), wrap_dec(i, n));
        let (jp, jm) = (wrap_inc(j, n), wrap_dec(j, n));
        let d = coeffs[i * n + j];
        let diffusion_off = -dt * nu * inv_h2;
        row[0] = 1.0 + 4.0 * dt * nu * inv_h2 - dt * inv_h * (d[0] - d[1] + d[2] - d[3]);
        row[1] = diffusion_off - dt * inv_h * coeffs[ip * n + j][1]; // m_{i+1,j}
        row[2] = diffusion_off + dt * inv_h * coeffs[im * n + j][0]; // m_{i−1,j}
        row[3] = diffusion_off - dt * inv_h * coeffs[i * n + jp][3]; // m_{i,j+1}
        row[4] = diffusion_off + dt * inv_h * coeffs[i * n + jm][2]; // m_{i,j−1}
        assert!(row[0] > 0.0, "FP matrix lost its positive diagonal");
        assert!(
            row[1] <= 0.0 && row[2] <= 0.0 && row[3] <= 0.0 && row[4] <= 0.0,
            "FP matrix lost its off-diagonal sign pattern"
        );
    });
    a
}

/// One backward step: given `m^{n+1}` and `u^{n+1}`, solves
/// `A m^n = m^{n+1}` to the configured relative residual.
pub fn fp_step(
    m_next: &GridFunction,
    u_next: &GridFunction,
    problem: &ProblemSpec,
    dt: f64,
    config: &SolveConfig,
) -> Result<(GridFunction, FpStepReport)> {
    let hamiltonian = problem.hamiltonian.sample_on_grid(u_next.n_h())?;
    fp_step_sampled(m_next, u_next, problem, &hamiltonian, dt, config, 0)
}

pub(crate) fn fp_step_sampled(
    m_next: &GridFunction,
    u_next: &GridFunction,
    problem: &ProblemSpec,
    hamiltonian: &SampledHamiltonian,
    dt: f64,
    config: &SolveConfig,
    time_index: usize,
) -> Result<(GridFunction, FpStepReport)> {
    let n = m_next.n_h();
    assert_eq!(u_next.n_h(), n);
    assert!(dt > 0.0);
    let coeffs = transport_coefficients(u_next, hamiltonian);
    let a = assemble_fp_matrix(&coeffs, n, problem.nu, dt);

    // Jacobi row scaling, then BiCGStab on the scaled system. The previous
    // density slice is an O(Δt)-accurate initial guess, and passes through
    // bit-exactly whenever it already solves the system (constants).
    let mut scaled = a.clone();
    let mut rhs = m_next.values().to_vec();
    scaled.jacobi_scale_rows(&mut rhs);
    let mut solution = m_next.values().to_vec();
    let stats = bicgstab(
        |p, out| scaled.matvec(p, out),
        &rhs,
        &mut solution,
        config.tol_lin,
        config.max_lin,
    );
    let mut iterations = stats.iterations;
    if !stats.converged {
        if n <= 8 {
            // Small instances fall back to a dense factorization.
            let dense = a.to_dense();
            let b = nalgebra::DVector::from_column_slice(m_next.values());
            let lu = dense.lu();
            match lu.solve(&b) {
                Some(x) => solution.copy_from_slice(x.as_slice()),
                None => {
                    return Err(MfgError::LinearSolveFailure {
                        context: format!("dense FP fallback at time index {time_index}"),
                        residual: stats.relative_residual,
                        iterations,
                    })
                }
            }
            iterations += 1;
        } else {
            return Err(MfgError::LinearSolveFailure {
                context: format!("FP step at time index {time_index}"),
                residual: stats.relative_residual,
                iterations,
            });
        }
    }

    let m_curr = GridFunction::new(n, solution)?;
    let min_value = m_curr.min();
    if m_next.min() >= 0.0 && min_value < -1e-9 {
        return Err(MfgError::NegativityViolation {
            context: format!("FP step at time index {time_index}"),
            min: min_value,
        });
    }
    let report = FpStepReport {
        linear_iterations: iterations,
        residual: stats.relative_residual,
        min_value,
        mass: m_curr.mass(),
    };
    Ok((m_curr, report))
}

/// Backward sweep from the terminal density: `m^{N_T} = m_T`, then
/// `m^n` from `m^{n+1}` and `u^{n+1}` for `n = N_T−1, …, 0`.
pub fn solve_backward(
    m_terminal: &GridFunction,
    u_traj: &Trajectory,
    problem: &ProblemSpec,
    config: &SolveConfig,
) -> Result<Trajectory> {
    let n_t = u_traj.n_t();
    let dt = u_traj.dt();
    assert_eq!(m_terminal.n_h(), u_traj.n_h());
    let hamiltonian = problem.hamiltonian.sample_on_grid(u_traj.n_h())?;
    let mut reversed = Vec::with_capacity(n_t + 1);
    reversed.push(m_terminal.clone());
    for step in 0..n_t {
        let n = n_t - 1 - step;
        let (m_curr, _report) = fp_step_sampled(
            &reversed[step],
            u_traj.slice(n + 1),
            problem,
            &hamiltonian,
            dt,
            config,
            n,
        )?;
        reversed.push(m_curr);
    }
    reversed.reverse();
    Trajectory::new(dt, reversed)
}

/// Gauss-Legendre nodes and weights (4 points on [−1, 1]).
const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_85,
];

/// Terminal data: per-cell averages of the density over the squares
/// `|x − x_{i,j}|_∞ ≤ h/2`, by tensor 4-point Gauss quadrature, then
/// rescaled so the discrete mass is exactly one.
pub fn cell_average_density(density: &Sampler, n_h: usize) -> Result<GridFunction> {
    let h = 1.0 / n_h as f64;
    let half = h / 2.0;
    let mut negative: Option<(f64, f64, f64)> = None;
    let mut grid = GridFunction::zeros(n_h)?;
    for i in 0..n_h {
        for j in 0..n_h {
            let (xc, yc) = (i as f64 * h, j as f64 * h);
            let mut sum = 0.0;
            for (a, &xi) in GAUSS_NODES.iter().enumerate() {
                for (b, &eta) in GAUSS_NODES.iter().enumerate() {
                    let x1 = xc + half * xi;
                    let x2 = yc + half * eta;
                    let value = density.eval(x1, x2);
                    if value < 0.0 && negative.is_none() {
                        negative = Some((x1, x2, value));
                    }
                    sum += GAUSS_WEIGHTS[a] * GAUSS_WEIGHTS[b] * value;
                }
            }
            grid.set(i, j, 0.25 * sum);
        }
    }
    if let Some((x1, x2, value)) = negative {
        return Err(MfgError::NegativeDensity { x1, x2, value });
    }
    let mass = grid.mass();
    if !(mass > 0.0) {
        return Err(MfgError::invalid(
            "m_T",
            format!("terminal density has non-positive mass {mass}"),
        ));
    }
    // Rescale, then fold the remaining ulp-level summation residue into the
    // largest cell so the fixed-order mass is 1.0 bit-exactly. The
    // correction is a few ulps of that cell, far below quadrature accuracy.
    for v in grid.values_mut() {
        *v /= mass;
    }
    let k_max = (0..grid.len())
        .max_by(|&a, &b| grid.values()[a].total_cmp(&grid.values()[b]))
        .expect("non-empty grid");
    let h2 = h * h;
    for _ in 0..8 {
        let residue = grid.mass() - 1.0;
        if residue == 0.0 {
            break;
        }
        grid.values_mut()[k_max] -= residue / h2;
    }
    Ok(grid)
}
