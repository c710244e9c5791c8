//! Dense space-time Newton solver for small instances.
//!
//! All unknowns `{u^{k+1}}_{k<N_T}` and `{m^k}_{k<N_T}` are stacked into a
//! single vector and the full nonlinear residual of the coupled system is
//! driven to ℓ∞ ≤ 1e−10 by Newton with a finite-difference Jacobian and a
//! dense LU factorization. The residual is written here in plain scalar
//! form, deliberately not calling the modular stencil or sweep code: the
//! only shared ingredients are the Hamiltonian evaluations and the boundary
//! data, so agreement with the modular solver is a meaningful cross-check
//! rather than a tautology.

use crate::coupled::{initial_cost_grid, terminal_density_grid, Solution};
use crate::grid::{GridFunction, Trajectory};
use crate::hamiltonian::SampledHamiltonian;
use crate::problem::{ProblemSpec, SolveConfig};
use crate::Result;
use crate::MfgError;
use nalgebra::{DMatrix, DVector};

/// Hard cap on stacked unknowns for the dense path.
pub const ORACLE_UNKNOWN_LIMIT: usize = 512;

/// Whether a configuration fits the dense oracle's size limits.
pub fn within_oracle_limits(config: &SolveConfig) -> bool {
    let unknowns = 2 * config.n_t * config.n_h * config.n_h;
    config.n_h <= 6 && config.n_t <= 4 && unknowns <= ORACLE_UNKNOWN_LIMIT
}

const ORACLE_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-7;
const MAX_NEWTON: usize = 80;
const MAX_HALVINGS: usize = 40;

struct DenseSystem<'a> {
    n: usize,
    n_t: usize,
    dt: f64,
    nu: f64,
    problem: &'a ProblemSpec,
    hamiltonian: SampledHamiltonian,
    u0: Vec<f64>,
    m_terminal: Vec<f64>,
}

impl DenseSystem<'_> {
    fn unknowns(&self) -> usize {
        2 * self.n_t * self.n * self.n
    }

    #[inline]
    fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    #[inline]
    fn node(&self, slice: &[f64], i: isize, j: isize) -> f64 {
        slice[self.wrap(i) * self.n + self.wrap(j)]
    }

    /// Slice `u^k` for `k = 0..=N_T` (`k = 0` is data).
    fn u_slice<'s>(&'s self, state: &'s [f64], k: usize) -> &'s [f64] {
        let n2 = self.n * self.n;
        if k == 0 {
            &self.u0
        } else {
            &state[(k - 1) * n2..k * n2]
        }
    }

    /// Slice `m^k` for `k = 0..=N_T` (`k = N_T` is data).
    fn m_slice<'s>(&'s self, state: &'s [f64], k: usize) -> &'s [f64] {
        let n2 = self.n * self.n;
        if k == self.n_t {
            &self.m_terminal
        } else {
            let offset = self.n_t * n2;
            &state[offset + k * n2..offset + (k + 1) * n2]
        }
    }

    fn laplacian(&self, slice: &[f64], i: isize, j: isize) -> f64 {
        let h2 = 1.0 / (self.n * self.n) as f64;
        -(4.0 * self.node(slice, i, j)
            - self.node(slice, i + 1, j)
            - self.node(slice, i - 1, j)
            - self.node(slice, i, j + 1)
            - self.node(slice, i, j - 1))
            / h2
    }

    fn one_sided(&self, slice: &[f64], i: isize, j: isize) -> [f64; 4] {
        let h = 1.0 / self.n as f64;
        [
            (self.node(slice, i + 1, j) - self.node(slice, i, j)) / h,
            (self.node(slice, i, j) - self.node(slice, i - 1, j)) / h,
            (self.node(slice, i, j + 1) - self.node(slice, i, j)) / h,
            (self.node(slice, i, j) - self.node(slice, i, j - 1)) / h,
        ]
    }

    fn grad_g(&self, u: &[f64], i: isize, j: isize) -> [f64; 4] {
        let q = self.one_sided(u, i, j);
        self.hamiltonian.grad((self.wrap(i), self.wrap(j)), q)
    }

    fn residual(&self, state: &[f64], out: &mut [f64]) {
        let n = self.n;
        let n2 = n * n;
        let h = 1.0 / n as f64;
        for k in 0..self.n_t {
            let u_next = self.u_slice(state, k + 1);
            let u_curr = self.u_slice(state, k);
            let m_curr = self.m_slice(state, k);
            let m_next = self.m_slice(state, k + 1);
            for i in 0..n as isize {
                for j in 0..n as isize {
                    let row = self.wrap(i) * n + self.wrap(j);
                    let q = self.one_sided(u_next, i, j);
                    let g = self.hamiltonian.eval((self.wrap(i), self.wrap(j)), q);
                    out[k * n2 + row] = (u_next[row] - u_curr[row]) / self.dt
                        - self.nu * self.laplacian(u_next, i, j)
                        + g
                        - self.problem.coupling.eval(m_curr[row]);

                    let d = self.grad_g(u_next, i, j);
                    let d_im = self.grad_g(u_next, i - 1, j);
                    let d_ip = self.grad_g(u_next, i + 1, j);
                    let d_jm = self.grad_g(u_next, i, j - 1);
                    let d_jp = self.grad_g(u_next, i, j + 1);
                    let transport = (self.node(m_curr, i, j) * d[0]
                        - self.node(m_curr, i - 1, j) * d_im[0]
                        + self.node(m_curr, i + 1, j) * d_ip[1]
                        - self.node(m_curr, i, j) * d[1]
                        + self.node(m_curr, i, j) * d[2]
                        - self.node(m_curr, i, j - 1) * d_jm[2]
                        + self.node(m_curr, i, j + 1) * d_jp[3]
                        - self.node(m_curr, i, j) * d[3])
                        / h;
                    out[(self.n_t + k) * n2 + row] = (m_next[row] - m_curr[row]) / self.dt
                        + self.nu * self.laplacian(m_curr, i, j)
                        + transport;
                }
            }
        }
    }
}

/// Solves the full coupled system by dense Newton. Limits: `n_h ≤ 6`,
/// `n_t ≤ 4`, at most [`ORACLE_UNKNOWN_LIMIT`] stacked unknowns.
pub fn oracle_solve(problem: &ProblemSpec, config: &SolveConfig) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    if !within_oracle_limits(config) {
        return Err(MfgError::OracleTooLarge {
            unknowns: 2 * config.n_t * config.n_h * config.n_h,
            limit: ORACLE_UNKNOWN_LIMIT,
        });
    }

    let n = config.n_h;
    let n_t = config.n_t;
    let dt = problem.horizon / n_t as f64;
    let u0 = initial_cost_grid(problem, n)?;
    let m_terminal = terminal_density_grid(problem, n)?;
    let system = DenseSystem {
        n,
        n_t,
        dt,
        nu: problem.nu,
        problem,
        hamiltonian: problem.hamiltonian.sample_on_grid(n)?,
        u0: u0.values().to_vec(),
        m_terminal: m_terminal.values().to_vec(),
    };

    let size = system.unknowns();
    let n2 = n * n;
    let mut state = vec![0.0; size];
    for k in 0..n_t {
        state[k * n2..(k + 1) * n2].copy_from_slice(u0.values());
        let offset = n_t * n2;
        state[offset + k * n2..offset + (k + 1) * n2].copy_from_slice(m_terminal.values());
    }

    let mut residual = vec![0.0; size];
    system.residual(&state, &mut residual);
    let mut res_norm = linf(&residual);

    for iteration in 0..MAX_NEWTON {
        if res_norm <= ORACLE_TOL {
            return Ok(pack_solution(&system, &state, dt, u0, m_terminal));
        }

        // Finite-difference Jacobian, column by column.
        let mut jacobian = DMatrix::zeros(size, size);
        let mut perturbed = vec![0.0; size];
        for col in 0..size {
            let saved = state[col];
            state[col] = saved + FD_STEP;
            system.residual(&state, &mut perturbed);
            state[col] = saved;
            for row in 0..size {
                jacobian[(row, col)] = (perturbed[row] - residual[row]) / FD_STEP;
            }
        }
        let rhs = DVector::from_column_slice(&residual);
        let direction = jacobian
            .lu()
            .solve(&rhs)
            .ok_or(MfgError::OracleDivergence {
                residual: res_norm,
                iterations: iteration,
            })?;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = state
                .iter()
                .zip(direction.iter())
                .map(|(x, d)| x - step * d)
                .collect();
            system.residual(&candidate, &mut perturbed);
            let cand_norm = linf(&perturbed);
            if cand_norm < res_norm {
                state = candidate;
                std::mem::swap(&mut residual, &mut perturbed);
                res_norm = cand_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(MfgError::OracleDivergence {
                residual: res_norm,
                iterations: iteration + 1,
            });
        }
    }
    if res_norm <= ORACLE_TOL {
        return Ok(pack_solution(&system, &state, dt, u0, m_terminal));
    }
    Err(MfgError::OracleDivergence {
        residual: res_norm,
        iterations: MAX_NEWTON,
    })
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn pack_solution(
    system: &DenseSystem<'_>,
    state: &[f64],
    dt: f64,
    u0: GridFunction,
    m_terminal: GridFunction,
) -> Solution {
    let n = system.n;
    let mut u_slices = vec![u0];
    for k in 1..=system.n_t {
        u_slices.push(
            GridFunction::new(n, system.u_slice(state, k).to_vec()).expect("oracle slice size"),
        );
    }
    let mut m_slices = Vec::new();
    for k in 0..system.n_t {
        m_slices.push(
            GridFunction::new(n, system.m_slice(state, k).to_vec()).expect("oracle slice size"),
        );
    }
    m_slices.push(m_terminal);
    Solution {
        u: Trajectory::new(dt, u_slices).expect("oracle trajectory"),
        m: Trajectory::new(dt, m_slices).expect("oracle trajectory"),
        outer_iterations: 0,
        converged: true,
        history: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{CouplingModel, HamiltonianModel, Potential};
    use crate::problem::Sampler;

    #[test]
    fn size_limit_is_enforced() {
        let problem = ProblemSpec {
            nu: 0.5,
            horizon: 1.0,
            hamiltonian: HamiltonianModel::power_upwind(2.0, Potential::Zero).unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let config = SolveConfig::with_resolution(32, 2);
        assert!(matches!(
            oracle_solve(&problem, &config),
            Err(MfgError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn constant_data_is_exact() {
        let problem = ProblemSpec {
            nu: 0.5,
            horizon: 0.5,
            hamiltonian: HamiltonianModel::power_upwind(2.0, Potential::Zero).unwrap(),
            coupling: CouplingModel::Identity,
            u0: Sampler::zero(),
            m_t: Sampler::constant(1.0),
        };
        let config = SolveConfig::with_resolution(4, 2);
        let dt = 0.25;
        let solution = oracle_solve(&problem, &config).unwrap();
        for k in 0..=2 {
            for &v in solution.u.slice(k).values() {
                assert!((v - k as f64 * dt).abs() <= 1e-11);
            }
            for &v in solution.m.slice(k).values() {
                assert!((v - 1.0).abs() <= 1e-11);
            }
        }
    }
}
