//! Forward sweep for the value function.
//!
//! Each step advances `u^n → u^{n+1}` through the semi-implicit equation
//!
//! ```text
//!   (u^{n+1} − u^n)/Δt − ν (Δ_h u^{n+1})_{i,j}
//!     + g(x_{i,j}, [∇_h u^{n+1}]_{i,j}) = F(m^n_{i,j}),
//! ```
//!
//! solved by Newton with an ℓ∞ backtracking line search. The Jacobian has
//! the periodic five-point pattern: the diffusion part contributes
//! `(1/Δt) I − ν Δ_h`, and the Hamiltonian part chains `∇_q g` through the
//! four one-sided differences. Under (g1) every off-diagonal entry is
//! nonpositive, so each Newton system is an M-matrix solved by BiCGStab.

use crate::grid::{GridFunction, Trajectory};
use crate::hamiltonian::SampledHamiltonian;
use crate::ops::{laplace_h, nabla_h};
use crate::problem::{ProblemSpec, SolveConfig};
use crate::sparse::{bicgstab, StencilMatrix};
use crate::Result;
use crate::{exec, MfgError};

/// Convergence record of one Newton solve.
#[derive(Clone, Copy, Debug)]
pub struct BellmanStepReport {
    pub newton_iterations: usize,
    pub final_residual_linf: f64,
    pub line_search_halvings: usize,
}

/// Pointwise residual of the semi-implicit step equation.
pub fn bellman_residual(
    u_next: &GridFunction,
    u_curr: &GridFunction,
    m_curr: &GridFunction,
    problem: &ProblemSpec,
    dt: f64,
) -> GridFunction {
    let hamiltonian = problem
        .hamiltonian
        .sample_on_grid(u_next.n_h())
        .expect("potential sampling");
    bellman_residual_sampled(u_next, u_curr, m_curr, &hamiltonian, &problem.coupling, problem.nu, dt)
}

fn bellman_residual_sampled(
    u_next: &GridFunction,
    u_curr: &GridFunction,
    m_curr: &GridFunction,
    hamiltonian: &SampledHamiltonian,
    coupling: &crate::hamiltonian::CouplingModel,
    nu: f64,
    dt: f64,
) -> GridFunction {
    let n = u_next.n_h();
    assert_eq!(u_curr.n_h(), n);
    assert_eq!(m_curr.n_h(), n);
    assert!(dt > 0.0);
    let lap = laplace_h(u_next);
    let grad = nabla_h(u_next);
    let mut out = u_next.clone();
    let (u_next_v, u_curr_v, m_v) = (u_next.values(), u_curr.values(), m_curr.values());
    let (lap_v, grad_v) = (lap.values(), grad.values());
    exec::fill(out.values_mut(), |k| {
        let (i, j) = (k / n, k % n);
        (u_next_v[k] - u_curr_v[k]) / dt - nu * lap_v[k] + hamiltonian.eval((i, j), grad_v[k])
            - coupling.eval(m_v[k])
    });
    out
}

/// Newton Jacobian of the step residual at `u_next`, assembled fresh from
/// the current gradient field.
fn assemble_jacobian(
    u_next: &GridFunction,
    hamiltonian: &SampledHamiltonian,
    nu: f64,
    dt: f64,
) -> StencilMatrix {
    let n = u_next.n_h();
    let inv_h = n as f64;
    let inv_h2 = (n * n) as f64;
    let grad = nabla_h(u_next);
    let grad_values = grad.values();
    StencilMatrix::assemble(n, |i, j, row| {
        let d = hamiltonian.grad((i, j), grad_values[i * n + j]);
        // (1/Δt) I − ν Δ_h part.
        let diffusion_diag = 1.0 / dt + 4.0 * nu * inv_h2;
        let diffusion_off = -nu * inv_h2;
        // Chain rule of g through the four one-sided differences:
        //   q₁ = (u_{i+1,j} − u_{i,j})/h, q₂ = (u_{i,j} − u_{i−1,j})/h,
        //   q₃ = (u_{i,j+1} − u_{i,j})/h, q₄ = (u_{i,j} − u_{i,j−1})/h.
        row[0] = diffusion_diag + (-d[0] + d[1] - d[2] + d[3]) * inv_h;
        row[1] = diffusion_off + d[0] * inv_h; // (i+1, j)
        row[2] = diffusion_off - d[1] * inv_h; // (i−1, j)
        row[3] = diffusion_off + d[2] * inv_h; // (i, j+1)
        row[4] = diffusion_off - d[3] * inv_h; // (i, j−1)
    })
}

/// One semi-implicit step: solves for `u_next` from `u_curr` and the
/// current density slice. Initial guess is `u_curr`.
pub fn bellman_step(
    u_curr: &GridFunction,
    m_curr: &GridFunction,
    problem: &ProblemSpec,
    dt: f64,
    config: &SolveConfig,
) -> Result<(GridFunction, BellmanStepReport)> {
    let hamiltonian = problem.hamiltonian.sample_on_grid(u_curr.n_h())?;
    bellman_step_sampled(u_curr, m_curr, problem, &hamiltonian, dt, config, 0)
}

pub(crate) fn bellman_step_sampled(
    u_curr: &GridFunction,
    m_curr: &GridFunction,
    problem: &ProblemSpec,
    hamiltonian: &SampledHamiltonian,
    dt: f64,
    config: &SolveConfig,
    time_index: usize,
) -> Result<(GridFunction, BellmanStepReport)> {
    let n = u_curr.n_h();
    let mut u = u_curr.clone();
    let mut residual = bellman_residual_sampled(
        &u,
        u_curr,
        m_curr,
        hamiltonian,
        &problem.coupling,
        problem.nu,
        dt,
    );
    let mut res_norm = residual.linf_norm();
    let mut total_halvings = 0usize;

    for iteration in 0..=config.max_newton {
        if res_norm <= config.tol_newton {
            return Ok((
                u,
                BellmanStepReport {
                    newton_iterations: iteration,
                    final_residual_linf: res_norm,
                    line_search_halvings: total_halvings,
                },
            ));
        }
        if iteration == config.max_newton {
            break;
        }

        let jacobian = assemble_jacobian(&u, hamiltonian, problem.nu, dt);
        let mut direction = vec![0.0; n * n];
        let stats = bicgstab(
            |p, out| jacobian.matvec(p, out),
            residual.values(),
            &mut direction,
            config.tol_lin,
            config.max_lin,
        );
        if !stats.converged {
            return Err(MfgError::LinearSolveFailure {
                context: format!("Bellman Newton system at time index {time_index}"),
                residual: stats.relative_residual,
                iterations: stats.iterations,
            });
        }
        let direction = GridFunction::new(n, direction)?;

        // Backtracking on the ℓ∞ residual: halve until it decreases.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            let candidate = u.axpy(-step, &direction);
            let cand_residual = bellman_residual_sampled(
                &candidate,
                u_curr,
                m_curr,
                hamiltonian,
                &problem.coupling,
                problem.nu,
                dt,
            );
            let cand_norm = cand_residual.linf_norm();
            if cand_norm < res_norm {
                u = candidate;
                residual = cand_residual;
                res_norm = cand_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
            total_halvings += 1;
        }
        if !accepted {
            return Err(MfgError::NewtonDivergence {
                context: format!("line search exhausted at time index {time_index}"),
                residual: res_norm,
                iterations: iteration + 1,
                halvings: total_halvings,
            });
        }
    }

    Err(MfgError::NewtonDivergence {
        context: format!("iteration cap at time index {time_index}"),
        residual: res_norm,
        iterations: config.max_newton,
        halvings: total_halvings,
    })
}

/// Forward sweep: `u⁰` is the initial cost grid; slice `n` of `m_traj`
/// feeds `F(m^n)` in the step to `u^{n+1}` (the terminal slice is unused).
pub fn solve_forward(
    u0: &GridFunction,
    m_traj: &Trajectory,
    problem: &ProblemSpec,
    config: &SolveConfig,
) -> Result<Trajectory> {
    let n_t = m_traj.n_t();
    let dt = m_traj.dt();
    let hamiltonian = problem.hamiltonian.sample_on_grid(u0.n_h())?;
    let mut slices = Vec::with_capacity(n_t + 1);
    slices.push(u0.clone());
    for n in 0..n_t {
        let (next, _report) = bellman_step_sampled(
            &slices[n],
            m_traj.slice(n),
            problem,
            &hamiltonian,
            dt,
            config,
            n,
        )?;
        slices.push(next);
    }
    Trajectory::new(dt, slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{CouplingModel, HamiltonianModel, Potential};
    use crate::problem::Sampler;

    fn constant_problem(nu: f64) -> ProblemSpec {
        ProblemSpec {
            nu,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(2.0, Potential::Zero).unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        }
    }

    #[test]
    fn residual_vanishes_on_exact_constant_step() {
        let n = 8;
        let dt = 0.1;
        let problem = constant_problem(0.5);
        let u_next = GridFunction::constant(n, dt).unwrap();
        let u_curr = GridFunction::zeros(n).unwrap();
        let m = GridFunction::constant(n, 1.0).unwrap();
        let r = bellman_residual(&u_next, &u_curr, &m, &problem, dt);
        assert!(r.linf_norm() <= 1e-15);
    }

    #[test]
    fn residual_zero_along_exact_constant_trajectory() {
        let n = 8;
        let dt = 0.25;
        let problem = constant_problem(0.3);
        let m = GridFunction::constant(n, 1.0).unwrap();
        for step in 0..4 {
            let u_curr = GridFunction::constant(n, step as f64 * dt).unwrap();
            let u_next = GridFunction::constant(n, (step + 1) as f64 * dt).unwrap();
            let r = bellman_residual(&u_next, &u_curr, &m, &problem, dt);
            assert!(r.linf_norm() <= 1e-14);
        }
    }

    // Independent per-node re-derivation of the residual.
    #[test]
    fn residual_matches_scalar_oracle() {
        let n = 8;
        let h = 1.0 / n as f64;
        let dt = 0.2;
        let nu = 0.4;
        let problem = ProblemSpec {
            nu,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(
                1.5,
                Potential::CosSum { amplitude: 0.8 },
            )
            .unwrap(),
            coupling: CouplingModel::Power { gamma: 2.0 },
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let u_next = GridFunction::from_fn(n, |i, j| {
            ((i * 13 + j * 7) % 11) as f64 * 0.13 - 0.6
        })
        .unwrap();
        let u_curr = GridFunction::from_fn(n, |i, j| ((i * 5 + j * 3) % 7) as f64 * 0.21).unwrap();
        let m = GridFunction::from_fn(n, |i, j| 0.5 + ((i + j) % 4) as f64 * 0.25).unwrap();

        let r = bellman_residual(&u_next, &u_curr, &m, &problem, dt);

        use std::f64::consts::PI;
        for i in 0..n as isize {
            for j in 0..n as isize {
                let lap = -(4.0 * u_next.at(i, j)
                    - u_next.at(i + 1, j)
                    - u_next.at(i - 1, j)
                    - u_next.at(i, j + 1)
                    - u_next.at(i, j - 1))
                    / (h * h);
                let q = [
                    (u_next.at(i + 1, j) - u_next.at(i, j)) / h,
                    (u_next.at(i, j) - u_next.at(i - 1, j)) / h,
                    (u_next.at(i, j + 1) - u_next.at(i, j)) / h,
                    (u_next.at(i, j) - u_next.at(i, j - 1)) / h,
                ];
                let p = [(-q[0]).max(0.0), q[1].max(0.0), (-q[2]).max(0.0), q[3].max(0.0)];
                let s: f64 = p.iter().map(|v| v * v).sum();
                let x1 = i as f64 * h;
                let x2 = j as f64 * h;
                let g = 0.8 * ((2.0 * PI * x1).cos() + (2.0 * PI * x2).cos()) + s.powf(0.75);
                let expected = (u_next.at(i, j) - u_curr.at(i, j)) / dt - nu * lap + g
                    - m.at(i, j).powi(2);
                let got = r.at(i, j);
                assert!(
                    (got - expected).abs() <= 1e-14 * (1.0 + expected.abs()),
                    "node ({i},{j}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn constant_data_step_converges_in_two_newton_iterations() {
        let n = 8;
        let dt = 0.125;
        let problem = constant_problem(0.5);
        let config = SolveConfig::with_resolution(n, 8);
        let u0 = GridFunction::zeros(n).unwrap();
        let m = GridFunction::constant(n, 1.0).unwrap();
        let (u1, report) = bellman_step(&u0, &m, &problem, dt, &config).unwrap();
        assert!(report.newton_iterations <= 2, "{report:?}");
        for &v in u1.values() {
            assert!((v - dt).abs() <= 1e-13);
        }
    }

    // Directional derivative of the residual against the assembled Jacobian.
    #[test]
    fn jacobian_matches_finite_differences() {
        let n = 8;
        let dt = 0.2;
        let problem = ProblemSpec {
            nu: 0.3,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(
                1.5,
                Potential::CosSum { amplitude: 0.5 },
            )
            .unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let hamiltonian = problem.hamiltonian.sample_on_grid(n).unwrap();
        let u = GridFunction::from_fn(n, |i, j| {
            0.3 * ((i * 7 + j * 5) % 9) as f64 * 0.1 + 0.05 * (i as f64)
        })
        .unwrap();
        let u_curr = GridFunction::zeros(n).unwrap();
        let m = GridFunction::constant(n, 1.0).unwrap();
        let direction =
            GridFunction::from_fn(n, |i, j| (((i * 3 + j * 11) % 5) as f64 - 2.0) * 0.31).unwrap();

        let jacobian = assemble_jacobian(&u, &hamiltonian, problem.nu, dt);
        let mut jv = vec![0.0; n * n];
        jacobian.matvec(direction.values(), &mut jv);

        let step = 1e-6;
        let up = u.axpy(step, &direction);
        let um = u.axpy(-step, &direction);
        let rp = bellman_residual(&up, &u_curr, &m, &problem, dt);
        let rm = bellman_residual(&um, &u_curr, &m, &problem, dt);
        for k in 0..n * n {
            let fd = (rp.values()[k] - rm.values()[k]) / (2.0 * step);
            let denom = jv[k].abs().max(1.0);
            assert!(
                (jv[k] - fd).abs() / denom <= 1e-6,
                "entry {k}: analytic {} vs fd {fd}",
                jv[k]
            );
        }
    }

    // Dense-Newton oracle on the 16 unknowns of one step: finite-difference
    // Jacobian plus scalar Gaussian elimination, sharing nothing with the
    // sparse path.
    #[test]
    fn step_matches_dense_newton_oracle() {
        let n = 4usize;
        let h = 0.25;
        let dt = 0.25;
        let nu = 0.3;
        let problem = ProblemSpec {
            nu,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(2.0, Potential::Zero).unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let config = SolveConfig::with_resolution(n, 4);
        let u_curr =
            GridFunction::sample(n, |x1, _| (2.0 * std::f64::consts::PI * x1).cos()).unwrap();
        let m = GridFunction::constant(n, 1.0).unwrap();

        let (u_next, _) = bellman_step(&u_curr, &m, &problem, dt, &config).unwrap();

        // Scalar residual of the step equation.
        let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
        let residual = |u: &[f64]| -> Vec<f64> {
            let at = |u: &[f64], i: isize, j: isize| u[wrap(i) * n + wrap(j)];
            let mut out = vec![0.0; n * n];
            for i in 0..n as isize {
                for j in 0..n as isize {
                    let lap = -(4.0 * at(u, i, j)
                        - at(u, i + 1, j)
                        - at(u, i - 1, j)
                        - at(u, i, j + 1)
                        - at(u, i, j - 1))
                        / (h * h);
                    let q1 = (at(u, i + 1, j) - at(u, i, j)) / h;
                    let q2 = (at(u, i, j) - at(u, i - 1, j)) / h;
                    let q3 = (at(u, i, j + 1) - at(u, i, j)) / h;
                    let q4 = (at(u, i, j) - at(u, i, j - 1)) / h;
                    let g = (-q1).max(0.0).powi(2)
                        + q2.max(0.0).powi(2)
                        + (-q3).max(0.0).powi(2)
                        + q4.max(0.0).powi(2);
                    out[wrap(i) * n + wrap(j)] =
                        (at(u, i, j) - u_curr.at(i, j)) / dt - nu * lap + g - 1.0;
                }
            }
            out
        };

        // Dense Newton with finite-difference Jacobian.
        let size = n * n;
        let mut u: Vec<f64> = u_curr.values().to_vec();
        for _ in 0..60 {
            let r = residual(&u);
            if r.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= 1e-12 {
                break;
            }
            let mut jac = vec![vec![0.0f64; size]; size];
            for col in 0..size {
                let saved = u[col];
                u[col] = saved + 1e-7;
                let rp = residual(&u);
                u[col] = saved;
                for row in 0..size {
                    jac[row][col] = (rp[row] - r[row]) / 1e-7;
                }
            }
            let mut rhs = r;
            for col in 0..size {
                let pivot = (col..size)
                    .max_by(|&a, &b| jac[a][col].abs().total_cmp(&jac[b][col].abs()))
                    .unwrap();
                jac.swap(col, pivot);
                rhs.swap(col, pivot);
                for row in col + 1..size {
                    let factor = jac[row][col] / jac[col][col];
                    for c in col..size {
                        jac[row][c] -= factor * jac[col][c];
                    }
                    rhs[row] -= factor * rhs[col];
                }
            }
            let mut delta = vec![0.0; size];
            for row in (0..size).rev() {
                let mut acc = rhs[row];
                for c in row + 1..size {
                    acc -= jac[row][c] * delta[c];
                }
                delta[row] = acc / jac[row][row];
            }
            for k in 0..size {
                u[k] -= delta[k];
            }
        }

        for k in 0..size {
            assert!(
                (u_next.values()[k] - u[k]).abs() <= 1e-9,
                "entry {k}: {} vs oracle {}",
                u_next.values()[k],
                u[k]
            );
        }
    }

    #[test]
    fn forward_sweep_reproduces_exact_constant_solution() {
        let n = 8;
        let n_t = 8;
        let problem = constant_problem(0.7);
        let config = SolveConfig::with_resolution(n, n_t);
        let dt = problem.horizon / n_t as f64;
        let u0 = GridFunction::zeros(n).unwrap();
        let ones = GridFunction::constant(n, 1.0).unwrap();
        let m_traj = Trajectory::replicate(dt, n_t, &ones).unwrap();
        let u = solve_forward(&u0, &m_traj, &problem, &config).unwrap();
        for step in 0..=n_t {
            let expected = step as f64 * dt;
            for &v in u.slice(step).values() {
                assert!((v - expected).abs() <= 1e-13, "slice {step}");
            }
        }
    }

    // Monotonicity smoke test: raising the coupling term pointwise can only
    // raise the next value slice (up to solver tolerance).
    #[test]
    fn step_is_monotone_in_coupling() {
        let n = 8;
        let dt = 0.125;
        let problem = ProblemSpec {
            nu: 0.4,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(
                2.0,
                Potential::CosSum { amplitude: 1.0 },
            )
            .unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let config = SolveConfig::with_resolution(n, 8);
        let u_curr = GridFunction::sample(n, |x1, _| (2.0 * std::f64::consts::PI * x1).cos())
            .unwrap();
        let m = GridFunction::constant(n, 1.0).unwrap();
        let c = 0.35;
        let m_shifted = m.map(|v| v + c);
        let (u_a, _) = bellman_step(&u_curr, &m, &problem, dt, &config).unwrap();
        let (u_b, _) = bellman_step(&u_curr, &m_shifted, &problem, dt, &config).unwrap();
        for k in 0..n * n {
            let (a, b) = (u_a.values()[k], u_b.values()[k]);
            assert!(b >= a - 1e-12, "monotonicity violated at {k}: {b} < {a}");
            assert!(b <= a + c * dt * (1.0 + 1e-6) + 1e-12, "upper bound at {k}");
        }
    }
}
