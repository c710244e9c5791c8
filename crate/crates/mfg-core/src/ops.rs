//! Elementary finite difference operators on the periodic grid.
//!
//! With `h = 1/n_h` and all indices modulo `n_h`:
//!
//! ```text
//!   (D₁⁺v)_{i,j} = (v_{i+1,j} − v_{i,j}) / h
//!   (D₂⁺v)_{i,j} = (v_{i,j+1} − v_{i,j}) / h
//!   [∇_h v]_{i,j} = ((D₁⁺v)_{i,j}, (D₁⁺v)_{i−1,j}, (D₂⁺v)_{i,j}, (D₂⁺v)_{i,j−1})
//!   (Δ_h v)_{i,j} = −(4v_{i,j} − v_{i+1,j} − v_{i−1,j} − v_{i,j+1} − v_{i,j−1}) / h²
//! ```

use crate::exec;
use crate::grid::{GridFunction, VectorField4};

#[inline]
pub(crate) fn wrap_inc(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
pub(crate) fn wrap_dec(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

/// Forward difference in the first index.
pub fn d1_plus(v: &GridFunction) -> GridFunction {
    let n = v.n_h();
    let inv_h = n as f64;
    let mut out = v.clone();
    let vals = v.values();
    exec::fill(out.values_mut(), |k| {
        let (i, j) = (k / n, k % n);
        (vals[wrap_inc(i, n) * n + j] - vals[k]) * inv_h
    });
    out
}

/// Forward difference in the second index.
pub fn d2_plus(v: &GridFunction) -> GridFunction {
    let n = v.n_h();
    let inv_h = n as f64;
    let mut out = v.clone();
    let vals = v.values();
    exec::fill(out.values_mut(), |k| {
        let (i, j) = (k / n, k % n);
        (vals[i * n + wrap_inc(j, n)] - vals[k]) * inv_h
    });
    out
}

/// The four one-sided differences at every node.
pub fn nabla_h(v: &GridFunction) -> VectorField4 {
    let n = v.n_h();
    let inv_h = n as f64;
    let vals = v.values();
    let mut out = vec![[0.0; 4]; n * n];
    exec::fill(&mut out, |k| {
        let (i, j) = (k / n, k % n);
        let c = vals[k];
        let e = vals[wrap_inc(i, n) * n + j];
        let w = vals[wrap_dec(i, n) * n + j];
        let nn = vals[i * n + wrap_inc(j, n)];
        let s = vals[i * n + wrap_dec(j, n)];
        [
            (e - c) * inv_h,
            (c - w) * inv_h,
            (nn - c) * inv_h,
            (c - s) * inv_h,
        ]
    });
    VectorField4::from_values(n, out)
}

/// Five-point discrete Laplacian.
pub fn laplace_h(v: &GridFunction) -> GridFunction {
    let n = v.n_h();
    let inv_h2 = (n * n) as f64;
    let mut out = v.clone();
    let vals = v.values();
    exec::fill(out.values_mut(), |k| {
        let (i, j) = (k / n, k % n);
        let c = vals[k];
        let e = vals[wrap_inc(i, n) * n + j];
        let w = vals[wrap_dec(i, n) * n + j];
        let nn = vals[i * n + wrap_inc(j, n)];
        let s = vals[i * n + wrap_dec(j, n)];
        -(4.0 * c - e - w - nn - s) * inv_h2
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::l2_inner;
    use proptest::prelude::*;

    fn indicator(n_h: usize, i0: usize, j0: usize) -> GridFunction {
        GridFunction::from_fn(n_h, |i, j| if (i, j) == (i0, j0) { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn d1_plus_of_constant_is_zero() {
        let v = GridFunction::constant(8, 3.7).unwrap();
        assert!(d1_plus(&v).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn d1_plus_linear_ramp_wraps() {
        let v = GridFunction::from_fn(4, |i, _| i as f64).unwrap();
        let d = d1_plus(&v);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == 3 { -12.0 } else { 4.0 };
                assert_eq!(d.get(i, j), expected);
            }
        }
    }

    #[test]
    fn d2_plus_linear_ramp_wraps() {
        let v = GridFunction::from_fn(4, |_, j| j as f64).unwrap();
        let d = d2_plus(&v);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if j == 3 { -12.0 } else { 4.0 };
                assert_eq!(d.get(i, j), expected);
            }
        }
    }

    // Independent scalar recomputation of D₁⁺ on a sampled sine.
    #[test]
    fn d1_plus_matches_direct_summation_oracle() {
        let n = 8;
        let h = 1.0 / n as f64;
        let v = GridFunction::sample(n, |x1, _| (2.0 * std::f64::consts::PI * x1).sin()).unwrap();
        let d = d1_plus(&v);
        for i in 0..n {
            for j in 0..n {
                let f = |ii: usize| (2.0 * std::f64::consts::PI * (ii as f64 * h)).sin();
                let expected = (f((i + 1) % n) - f(i)) / h;
                assert!((d.get(i, j) - expected).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn d2_plus_is_d1_plus_of_transpose() {
        let v = GridFunction::from_fn(8, |i, j| ((i * 31 + j * 17) % 13) as f64 * 0.37).unwrap();
        let vt = GridFunction::from_fn(8, |i, j| v.get(j, i)).unwrap();
        let d2 = d2_plus(&v);
        let d1t = d1_plus(&vt);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(d2.get(i, j), d1t.get(j, i));
            }
        }
    }

    #[test]
    fn nabla_h_constant_is_zero() {
        let v = GridFunction::constant(4, -2.0).unwrap();
        assert!(nabla_h(&v).values().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn nabla_h_indicator_at_origin() {
        let g = nabla_h(&indicator(4, 0, 0));
        assert_eq!(g.get(0, 0), [-4.0, 4.0, -4.0, 4.0]);
    }

    #[test]
    fn laplace_h_constant_is_zero() {
        let v = GridFunction::constant(8, 5.0).unwrap();
        assert!(laplace_h(&v).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplace_h_indicator_stencil() {
        let l = laplace_h(&indicator(4, 0, 0));
        for i in 0..4 {
            for j in 0..4 {
                let expected = match (i, j) {
                    (0, 0) => -64.0,
                    (1, 0) | (3, 0) | (0, 1) | (0, 3) => 16.0,
                    _ => 0.0,
                };
                assert_eq!(l.get(i, j), expected, "node ({i},{j})");
            }
        }
    }

    #[test]
    fn laplace_h_is_self_adjoint() {
        let v = GridFunction::from_fn(8, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0).unwrap();
        let w = GridFunction::from_fn(8, |i, j| ((i * 5 + j * 13) % 17) as f64 * 0.25).unwrap();
        let a = l2_inner(&laplace_h(&v), &w);
        let b = l2_inner(&v, &laplace_h(&w));
        let scale = a.abs().max(b.abs()).max(1.0);
        assert!((a - b).abs() / scale <= 1e-14);
    }

    proptest! {
        // All operators commute with cyclic shifts of the input, exactly.
        #[test]
        fn operators_commute_with_shifts(
            seed in 0u64..1000,
            di in -3isize..4,
            dj in -3isize..4,
        ) {
            let v = GridFunction::from_fn(8, |i, j| {
                let k = (i * 8 + j) as u64;
                let x = k.wrapping_mul(6364136223846793005).wrapping_add(seed);
                (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).unwrap();
            let shifted = v.shifted(di, dj);
            prop_assert_eq!(laplace_h(&shifted), laplace_h(&v).shifted(di, dj));
            prop_assert_eq!(d1_plus(&shifted), d1_plus(&v).shifted(di, dj));
            prop_assert_eq!(d2_plus(&shifted), d2_plus(&v).shifted(di, dj));
        }

        // Compatibility of the four one-sided differences: q₁ at (i,j) is the
        // same difference as q₂ at (i+1,j), and q₃/q₄ likewise in j.
        #[test]
        fn nabla_h_compatibility(seed in 0u64..1000) {
            let v = GridFunction::from_fn(8, |i, j| {
                let k = (i * 8 + j) as u64;
                let x = k.wrapping_mul(2862933555777941757).wrapping_add(seed);
                (x >> 11) as f64 / (1u64 << 53) as f64
            }).unwrap();
            let g = nabla_h(&v);
            for i in 0..8isize {
                for j in 0..8isize {
                    prop_assert_eq!(g.at(i, j)[0], g.at(i + 1, j)[1]);
                    prop_assert_eq!(g.at(i, j)[2], g.at(i, j + 1)[3]);
                }
            }
        }

        // Summation by parts: the Laplacian has exact zero mean.
        #[test]
        fn laplacian_has_zero_mean(seed in 0u64..1000) {
            let v = GridFunction::from_fn(8, |i, j| {
                let k = (i * 8 + j) as u64;
                let x = k.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(seed.wrapping_mul(0xBF58476D1CE4E5B9));
                (x >> 11) as f64 / (1u64 << 53) as f64 * 10.0 - 5.0
            }).unwrap();
            let mean = laplace_h(&v).mass();
            let scale = v.linf_norm().max(1.0);
            prop_assert!(mean.abs() <= 1e-14 * scale * 64.0);
        }
    }

    // Consistency order: Δ_h on a smooth sample converges at O(h²); the
    // error ratio between dyadic refinements sits near 4.
    #[test]
    fn laplace_h_second_order_consistency() {
        use std::f64::consts::PI;
        let exact = |x1: f64, x2: f64| (2.0 * PI * x1).sin() * (2.0 * PI * x2).cos();
        let mut errors = Vec::new();
        for n in [16usize, 32, 64] {
            let v = GridFunction::sample(n, exact).unwrap();
            let lv = laplace_h(&v);
            let target =
                GridFunction::sample(n, |x1, x2| -8.0 * PI * PI * exact(x1, x2)).unwrap();
            errors.push(lv.sub(&target).linf_norm());
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.5..=4.5).contains(&ratio),
                "refinement ratio {ratio} outside [3.5, 4.5]"
            );
        }
    }
}
