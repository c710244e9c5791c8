//! Five-point stencil matrices and Krylov solvers.
//!
//! Every linear system in the scheme (Bellman Jacobian, Fokker-Planck step,
//! the `(I − Δ_h)` solve behind the H⁻¹ norm) has the same periodic
//! five-point sparsity pattern, so the matrix type stores exactly five
//! coefficients per row in a fixed neighbor order. Matrix assembly and
//! application are element-parallel; all inner products run in fixed index
//! order so solves are bit-reproducible.

use crate::exec;
use crate::ops::{wrap_dec, wrap_inc};

/// Per-row coefficient order: center, (i+1,j), (i−1,j), (i,j+1), (i,j−1).
pub const STENCIL_WIDTH: usize = 5;

/// Sparse matrix with the periodic five-point pattern on an `n_h × n_h` grid.
#[derive(Clone, Debug)]
pub struct StencilMatrix {
    n_h: usize,
    values: Vec<f64>, // row-contiguous, STENCIL_WIDTH entries per row
}

impl StencilMatrix {
    /// Assembles a matrix by filling each row's five coefficients.
    /// `f(i, j, row)` receives the row in the fixed neighbor order.
    pub fn assemble(n_h: usize, f: impl Fn(usize, usize, &mut [f64]) + Sync) -> Self {
        assert!(n_h >= 4);
        let mut values = vec![0.0; n_h * n_h * STENCIL_WIDTH];
        exec::fill_chunks(&mut values, STENCIL_WIDTH, |row, slot| {
            f(row / n_h, row % n_h, slot);
        });
        Self { n_h, values }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_h * self.n_h
    }

    #[inline]
    pub fn n_h(&self) -> usize {
        self.n_h
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * STENCIL_WIDTH..(k + 1) * STENCIL_WIDTH]
    }

    /// Column indices of row `(i, j)` in the fixed neighbor order.
    #[inline]
    pub fn row_columns(&self, i: usize, j: usize) -> [usize; STENCIL_WIDTH] {
        let n = self.n_h;
        [
            i * n + j,
            wrap_inc(i, n) * n + j,
            wrap_dec(i, n) * n + j,
            i * n + wrap_inc(j, n),
            i * n + wrap_dec(j, n),
        ]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_h;
        assert_eq!(x.len(), n * n);
        assert_eq!(y.len(), n * n);
        let values = &self.values;
        exec::fill(y, |k| {
            let (i, j) = (k / n, k % n);
            let row = &values[k * STENCIL_WIDTH..(k + 1) * STENCIL_WIDTH];
            row[0] * x[k]
                + row[1] * x[wrap_inc(i, n) * n + j]
                + row[2] * x[wrap_dec(i, n) * n + j]
                + row[3] * x[i * n + wrap_inc(j, n)]
                + row[4] * x[i * n + wrap_dec(j, n)]
        });
    }

    /// Scales each row by `1/diag` (Jacobi preconditioning applied to the
    /// system rather than inside the Krylov loop). Returns the scaling used.
    pub fn jacobi_scale_rows(&mut self, rhs: &mut [f64]) -> Vec<f64> {
        let n2 = self.n_rows();
        let mut inv_diag = vec![0.0; n2];
        for k in 0..n2 {
            let d = self.values[k * STENCIL_WIDTH];
            debug_assert!(d != 0.0);
            let inv = 1.0 / d;
            inv_diag[k] = inv;
            for c in 0..STENCIL_WIDTH {
                self.values[k * STENCIL_WIDTH + c] *= inv;
            }
            rhs[k] *= inv;
        }
        inv_diag
    }

    /// Dense copy, used by the small-instance fallback path.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n2 = self.n_rows();
        let mut dense = nalgebra::DMatrix::zeros(n2, n2);
        for i in 0..self.n_h {
            for j in 0..self.n_h {
                let k = i * self.n_h + j;
                let cols = self.row_columns(i, j);
                let row = self.row(k);
                for (c, &col) in cols.iter().enumerate() {
                    dense[(k, col)] += row[c];
                }
            }
        }
        dense
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug)]
pub struct IterStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed-order reduction: keep sequential for bit reproducibility.
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient for symmetric positive definite operators. The
/// incoming `x` is the initial guess; if it already meets the tolerance it
/// is returned untouched. Converges on `‖b − Ax‖ ≤ tol_rel · ‖b‖`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iterations: usize,
) -> IterStats {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return IterStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let initial_rel = norm(&r) / b_norm;
    if initial_rel <= tol_rel {
        return IterStats {
            iterations: 0,
            relative_residual: initial_rel,
            converged: true,
        };
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rho = dot(&r, &r);
    for it in 1..=max_iterations {
        apply(&p, &mut ap);
        let alpha = rho / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rho_next = dot(&r, &r);
        let rel = rho_next.sqrt() / b_norm;
        if rel <= tol_rel {
            return IterStats {
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        let beta = rho_next / rho;
        rho = rho_next;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    IterStats {
        iterations: max_iterations,
        relative_residual: rho.sqrt() / b_norm,
        converged: false,
    }
}

/// BiCGStab for nonsymmetric operators. The incoming `x` is the initial
/// guess; if it already meets the tolerance it is returned untouched.
/// Restarts on near-breakdown; convergence is confirmed against the true
/// residual, not the recursive one.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iterations: usize,
) -> IterStats {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return IterStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let breakdown = 1e-300;

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let initial_rel = norm(&r) / b_norm;
    if initial_rel <= tol_rel {
        return IterStats {
            iterations: 0,
            relative_residual: initial_rel,
            converged: true,
        };
    }
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut first = true;

    let true_rel = |x: &[f64], scratch: &mut Vec<f64>| -> f64 {
        let mut ax = vec![0.0; n];
        apply(x, &mut ax);
        scratch.clear();
        scratch.extend(b.iter().zip(&ax).map(|(bi, ai)| bi - ai));
        norm(scratch) / b_norm
    };

    let mut it = 0;
    while it < max_iterations {
        it += 1;
        let rho_next = dot(&r_hat, &r);
        if rho_next.abs() < breakdown {
            // Restart with the current residual as the shadow vector.
            let mut scratch = Vec::new();
            let rel = true_rel(x, &mut scratch);
            if rel <= tol_rel {
                return IterStats {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                };
            }
            r = scratch;
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            first = true;
            continue;
        }
        if first {
            p.copy_from_slice(&r);
            first = false;
        } else {
            let beta = (rho_next / rho) * (alpha / omega);
            for k in 0..n {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
        }
        rho = rho_next;
        apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < breakdown {
            first = true;
            continue;
        }
        alpha = rho / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / b_norm <= tol_rel {
            for k in 0..n {
                x[k] += alpha * p[k];
            }
            let mut scratch = Vec::new();
            let rel = true_rel(x, &mut scratch);
            if rel <= tol_rel {
                return IterStats {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                };
            }
            r = scratch;
            r_hat = r.clone();
            first = true;
            continue;
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt < breakdown {
            first = true;
            continue;
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] += alpha * p[k] + omega * s[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm(&r) / b_norm <= tol_rel {
            let mut scratch = Vec::new();
            let rel = true_rel(x, &mut scratch);
            if rel <= tol_rel {
                return IterStats {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                };
            }
            r = scratch;
            r_hat = r.clone();
            first = true;
        }
        if omega.abs() < breakdown {
            first = true;
        }
    }
    let mut scratch = Vec::new();
    let rel = true_rel(x, &mut scratch);
    IterStats {
        iterations: max_iterations,
        relative_residual: rel,
        converged: rel <= tol_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use crate::ops::laplace_h;

    fn identity_minus_laplacian(n_h: usize) -> StencilMatrix {
        let h2 = 1.0 / (n_h * n_h) as f64;
        StencilMatrix::assemble(n_h, |_, _, row| {
            row[0] = 1.0 + 4.0 / h2;
            for c in 1..STENCIL_WIDTH {
                row[c] = -1.0 / h2;
            }
        })
    }

    #[test]
    fn matvec_matches_operator_form() {
        let n = 8;
        let a = identity_minus_laplacian(n);
        let v = GridFunction::from_fn(n, |i, j| ((i * 5 + j * 11) % 7) as f64 - 3.0).unwrap();
        let expected = v.sub(&laplace_h(&v));
        let mut y = vec![0.0; n * n];
        a.matvec(v.values(), &mut y);
        for k in 0..n * n {
            assert!((y[k] - expected.values()[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 8;
        let a = identity_minus_laplacian(n);
        let b: Vec<f64> = (0..n * n).map(|k| ((k * 13) % 29) as f64 - 14.0).collect();
        let mut x = vec![0.0; n * n];
        let stats = conjugate_gradient(|p, out| a.matvec(p, out), &b, &mut x, 1e-12, 10_000);
        assert!(stats.converged, "CG stalled: {stats:?}");
        let mut ax = vec![0.0; n * n];
        a.matvec(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(y, bi)| (y - bi).powi(2)).sum();
        let bb: f64 = b.iter().map(|v| v * v).sum();
        assert!(res.sqrt() / bb.sqrt() <= 1e-11);
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 8;
        // Diffusion plus a skewed drift: nonsymmetric but diagonally dominant.
        let h = 1.0 / n as f64;
        let a = StencilMatrix::assemble(n, |i, j, row| {
            let drift = 0.7 + 0.2 * ((i + 2 * j) % 3) as f64;
            row[0] = 1.0 + 4.0 / (h * h) + drift / h;
            row[1] = -1.0 / (h * h) - drift / h;
            row[2] = -1.0 / (h * h);
            row[3] = -1.0 / (h * h) - 0.3 / h;
            row[4] = -1.0 / (h * h) + 0.3 / h;
        });
        let b: Vec<f64> = (0..n * n).map(|k| ((k * 7) % 17) as f64 * 0.5 - 4.0).collect();
        let mut x = vec![0.0; n * n];
        let stats = bicgstab(|p, out| a.matvec(p, out), &b, &mut x, 1e-12, 10_000);
        assert!(stats.converged, "BiCGStab stalled: {stats:?}");
        let mut ax = vec![0.0; n * n];
        a.matvec(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(y, bi)| (y - bi).powi(2)).sum();
        let bb: f64 = b.iter().map(|v| v * v).sum();
        assert!(res.sqrt() / bb.sqrt() <= 1e-11);
    }

    #[test]
    fn zero_rhs_returns_zero_in_zero_iterations() {
        let n = 4;
        let a = identity_minus_laplacian(n);
        let b = vec![0.0; n * n];
        let mut x = vec![1.0; n * n];
        let stats = conjugate_gradient(|p, out| a.matvec(p, out), &b, &mut x, 1e-12, 100);
        assert!(stats.converged);
        assert_eq!(stats.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
