//! The full forward-backward system, solved by damped fixed-point iteration.
//!
//! For all `0 ≤ i, j < N_h` and `0 ≤ k < N_T`:
//!
//! ```text
//!   (u^{k+1} − u^k)/Δt − ν (Δ_h u^{k+1}) + g(x, [∇_h u^{k+1}]) = F(m^k)
//!   (m^{k+1} − m^k)/Δt + ν (Δ_h m^k) + 𝒯(u^{k+1}, m^k) = 0
//! ```
//!
//! with `u⁰` sampled from the initial cost and `m^{N_T}` the cell averages
//! of the terminal density. The iteration runs on the density trajectory:
//! sweep `u` forward against the current `m`, sweep `m` backward against
//! that `u`, then blend with damping `θ`. Convergence is measured as the
//! sup over time slices of the spatial L¹ change of `m`, matching the
//! topology in which the scheme converges under refinement. On success one
//! final forward/backward pass re-synchronizes the returned pair.

use crate::bellman::solve_forward;
use crate::fokker_planck::{cell_average_density, solve_backward, transport};
use crate::grid::{GridFunction, Trajectory};
use crate::ops::laplace_h;
use crate::problem::{ProblemSpec, SolveConfig};
use crate::Result;
use crate::{exec, MfgError};

/// One outer iteration of the fixed-point loop.
#[derive(Clone, Copy, Debug)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `sup_n ‖m_new^n − m^n‖_{L¹}` before the damped update.
    pub delta: f64,
}

/// A solved (or best-effort) discrete system.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Trajectory,
    pub m: Trajectory,
    pub outer_iterations: usize,
    pub converged: bool,
    pub history: Vec<OuterRecord>,
}

/// Initial cost grid `u⁰_{i,j} = u₀(x_{i,j})`.
pub fn initial_cost_grid(problem: &ProblemSpec, n_h: usize) -> Result<GridFunction> {
    problem.u0.sample_grid(n_h)
}

/// Terminal density grid: cell averages of `m_T`, mass exactly one.
pub fn terminal_density_grid(problem: &ProblemSpec, n_h: usize) -> Result<GridFunction> {
    cell_average_density(&problem.m_t, n_h)
}

fn blend(previous: &Trajectory, proposal: &Trajectory, theta: f64) -> Result<Trajectory> {
    let slices = previous
        .slices()
        .iter()
        .zip(proposal.slices())
        .map(|(old, new)| {
            let mut out = old.clone();
            let (a, b) = (old.values(), new.values());
            exec::fill(out.values_mut(), |k| (1.0 - theta) * a[k] + theta * b[k]);
            out
        })
        .collect();
    Trajectory::new(previous.dt(), slices)
}

/// Solves the coupled system starting from the uniform-in-time terminal
/// density trajectory.
pub fn solve(problem: &ProblemSpec, config: &SolveConfig) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    let m_terminal = terminal_density_grid(problem, config.n_h)?;
    let m_init = Trajectory::replicate(
        problem.horizon / config.n_t as f64,
        config.n_t,
        &m_terminal,
    )?;
    solve_from(problem, config, m_init)
}

/// Solves the coupled system from a caller-supplied initial density
/// trajectory (multi-start studies).
pub fn solve_from(
    problem: &ProblemSpec,
    config: &SolveConfig,
    m_init: Trajectory,
) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    let _dt = problem.horizon / config.n_t as f64;
    if m_init.n_h() != config.n_h || m_init.n_t() != config.n_t {
        return Err(MfgError::invalid(
            "m_init",
            format!(
                "initial trajectory is {}x{} slices, config wants {}x{}",
                m_init.n_h(),
                m_init.n_t(),
                config.n_h,
                config.n_t
            ),
        ));
    }
    let u0 = initial_cost_grid(problem, config.n_h)?;
    let m_terminal = terminal_density_grid(problem, config.n_h)?;

    let mut m_current = m_init;
    let mut history = Vec::new();
    let mut last_delta = f64::INFINITY;
    let mut converged_at = None;

    for iteration in 1..=config.max_outer {
        let u = solve_forward(&u0, &m_current, problem, config)?;
        let m_proposal = solve_backward(&m_terminal, &u, problem, config)?;
        let delta = m_proposal.sup_l1_distance(&m_current);
        history.push(OuterRecord { iteration, delta });
        m_current = blend(&m_current, &m_proposal, config.damping)?;
        last_delta = delta;
        if delta < config.tol_fixed_point {
            converged_at = Some(iteration);
            break;
        }
    }

    // Final pass: re-synchronize the returned pair with the settled density.
    let u = solve_forward(&u0, &m_current, problem, config)?;
    let m = solve_backward(&m_terminal, &u, problem, config)?;

    match converged_at {
        Some(outer_iterations) => Ok(Solution {
            u,
            m,
            outer_iterations,
            converged: true,
            history,
        }),
        None => Err(MfgError::MaxOuterExceeded {
            max_outer: config.max_outer,
            delta: last_delta,
            solution: Box::new(Solution {
                u,
                m,
                outer_iterations: config.max_outer,
                converged: false,
                history,
            }),
        }),
    }
}

/// ℓ∞ residuals of the two coupled equations over all `(i, j, k)`.
pub fn global_residual(
    u: &Trajectory,
    m: &Trajectory,
    problem: &ProblemSpec,
) -> Result<(f64, f64)> {
    assert_eq!(u.n_t(), m.n_t());
    assert_eq!(u.n_h(), m.n_h());
    let n = u.n_h();
    let dt = u.dt();
    let hamiltonian = problem.hamiltonian.sample_on_grid(n)?;
    let mut bellman_linf = 0.0f64;
    let mut fp_linf = 0.0f64;
    for k in 0..u.n_t() {
        let u_next = u.slice(k + 1);
        let u_curr = u.slice(k);
        let m_curr = m.slice(k);
        let m_next = m.slice(k + 1);

        let lap_u = laplace_h(u_next);
        let grad_u = crate::ops::nabla_h(u_next);
        for idx in 0..n * n {
            let (i, j) = (idx / n, idx % n);
            let residual = (u_next.values()[idx] - u_curr.values()[idx]) / dt
                - problem.nu * lap_u.values()[idx]
                + hamiltonian.eval((i, j), grad_u.values()[idx])
                - problem.coupling.eval(m_curr.values()[idx]);
            bellman_linf = bellman_linf.max(residual.abs());
        }

        let lap_m = laplace_h(m_curr);
        let t = transport(u_next, m_curr, &hamiltonian);
        for idx in 0..n * n {
            let residual = (m_next.values()[idx] - m_curr.values()[idx]) / dt
                + problem.nu * lap_m.values()[idx]
                + t.values()[idx];
            fp_linf = fp_linf.max(residual.abs());
        }
    }
    Ok((bellman_linf, fp_linf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{CouplingModel, HamiltonianModel, Potential};
    use crate::problem::Sampler;

    fn constant_data_problem(nu: f64) -> ProblemSpec {
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
    fn constant_data_solves_exactly_in_two_outer_iterations() {
        let problem = constant_data_problem(0.5);
        let config = SolveConfig::with_resolution(8, 8);
        let dt = problem.horizon / 8.0;
        let solution = solve(&problem, &config).unwrap();
        assert!(solution.converged);
        assert!(solution.outer_iterations <= 2, "{}", solution.outer_iterations);
        assert!(solution.history.last().unwrap().delta <= 1e-13);
        for k in 0..=8 {
            for &v in solution.u.slice(k).values() {
                assert!((v - k as f64 * dt).abs() <= 1e-12);
            }
            for &v in solution.m.slice(k).values() {
                assert!((v - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn global_residual_of_exact_solution_is_tiny() {
        let problem = constant_data_problem(0.5);
        let n_t = 8;
        let dt = problem.horizon / n_t as f64;
        let u_slices = (0..=n_t)
            .map(|k| GridFunction::constant(8, k as f64 * dt).unwrap())
            .collect();
        let u = Trajectory::new(dt, u_slices).unwrap();
        let ones = GridFunction::constant(8, 1.0).unwrap();
        let m = Trajectory::replicate(dt, n_t, &ones).unwrap();
        let (bellman, fp) = global_residual(&u, &m, &problem).unwrap();
        assert!(bellman <= 1e-13, "bellman {bellman}");
        assert!(fp <= 1e-13, "fp {fp}");
    }

    #[test]
    fn global_residual_of_solved_pair_is_below_inner_tolerances() {
        let problem = constant_data_problem(0.5);
        let config = SolveConfig::with_resolution(8, 8);
        let solution = solve(&problem, &config).unwrap();
        let (bellman, fp) = global_residual(&solution.u, &solution.m, &problem).unwrap();
        assert!(bellman <= config.tol_newton, "bellman {bellman}");
        assert!(fp <= 1e-10, "fp {fp}");
    }

    #[test]
    fn global_residual_detects_pointwise_perturbation() {
        let problem = constant_data_problem(0.5);
        let config = SolveConfig::with_resolution(8, 8);
        let dt = problem.horizon / 8.0;
        let solution = solve(&problem, &config).unwrap();
        let mut u = solution.u.clone();
        let mid = u.n_t() / 2;
        let old = u.slice(mid).get(3, 3);
        u.slice_mut(mid).set(3, 3, old + 1.0);
        let (bellman, _) = global_residual(&u, &solution.m, &problem).unwrap();
        let h2 = (8.0f64).powi(2);
        let floor = 1.0 / dt - 4.0 * problem.nu * h2 - 10.0;
        assert!(
            bellman >= floor.max(1.0 / dt * 0.5),
            "perturbation response {bellman} below stencil floor"
        );
    }

    #[test]
    fn max_outer_exceeded_carries_best_iterate() {
        use crate::hamiltonian::Potential;
        let problem = ProblemSpec {
            nu: 0.4,
            horizon: 0.5,
            hamiltonian: HamiltonianModel::power_upwind(
                1.5,
                Potential::CosSum { amplitude: 1.0 },
            )
            .unwrap(),
            coupling: CouplingModel::Power { gamma: 2.0 },
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let config = SolveConfig {
            max_outer: 1,
            tol_fixed_point: 1e-30,
            ..SolveConfig::with_resolution(8, 4)
        };
        match solve(&problem, &config) {
            Err(MfgError::MaxOuterExceeded { solution, .. }) => {
                assert!(!solution.converged);
                assert_eq!(solution.history.len(), 1);
            }
            other => panic!("expected MaxOuterExceeded, got {other:?}"),
        }
    }
}
