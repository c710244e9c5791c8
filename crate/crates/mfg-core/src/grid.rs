//! Grid functions on the periodic grid and time-indexed trajectories.
//!
//! The unit torus is discretized with `n_h` points per axis, mesh step
//! `h = 1/n_h`, nodes `x_{i,j} = (i h, j h)`. Values are stored row-major
//! with the second index `j` fastest, and every index is understood modulo
//! `n_h`. Reductions over a grid always run in that fixed storage order.

use crate::error::MfgError;
use crate::exec;
use crate::Result;
use std::fmt;

/// Scalar field on the periodic `n_h × n_h` grid.
#[derive(Clone, PartialEq)]
pub struct GridFunction {
    n_h: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// Minimum grid size: below this the five-point stencil neighbors alias.
    pub const MIN_N_H: usize = 4;

    pub fn new(n_h: usize, values: Vec<f64>) -> Result<Self> {
        if n_h < Self::MIN_N_H {
            return Err(MfgError::GridTooCoarse(n_h));
        }
        if values.len() != n_h * n_h {
            return Err(MfgError::invalid(
                "values",
                format!("expected {} values, got {}", n_h * n_h, values.len()),
            ));
        }
        Ok(Self { n_h, values })
    }

    pub fn constant(n_h: usize, value: f64) -> Result<Self> {
        Self::new(n_h, vec![value; n_h * n_h])
    }

    pub fn zeros(n_h: usize) -> Result<Self> {
        Self::constant(n_h, 0.0)
    }

    /// Builds a grid function from a node function `(i, j) -> value`.
    pub fn from_fn(n_h: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        let mut out = Self::zeros(n_h)?;
        exec::fill(&mut out.values, |k| f(k / n_h, k % n_h));
        Ok(out)
    }

    /// Samples a function of torus coordinates at the grid nodes.
    pub fn sample(n_h: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let h = 1.0 / n_h as f64;
        Self::from_fn(n_h, |i, j| f(i as f64 * h, j as f64 * h))
    }

    #[inline]
    pub fn n_h(&self) -> usize {
        self.n_h
    }

    /// Mesh step `h = 1/n_h`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n_h as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat storage index of the in-range pair `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_h && j < self.n_h);
        i * self.n_h + j
    }

    /// Value at in-range `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i, j);
        self.values[k] = value;
    }

    /// Periodic access: `(i, j)` resolves to `(i mod n_h, j mod n_h)`.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.n_h as isize;
        self.get(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)
    }

    /// The grid shifted cyclically by `(di, dj)`: `out(i,j) = self(i+di, j+dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> GridFunction {
        let n = self.n_h;
        let mut out = self.clone();
        exec::fill(&mut out.values, |k| {
            self.at((k / n) as isize + di, (k % n) as isize + dj)
        });
        out
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `h² Σ |v|`, the discrete L¹ norm (fixed summation order).
    pub fn l1_norm(&self) -> f64 {
        self.h() * self.h() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `h² Σ v`, the discrete integral over the torus (fixed summation order).
    pub fn mass(&self) -> f64 {
        self.h() * self.h() * self.values.iter().sum::<f64>()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Element-wise `self + scale * other`.
    pub fn axpy(&self, scale: f64, other: &GridFunction) -> GridFunction {
        assert_eq!(self.n_h, other.n_h);
        let mut out = self.clone();
        exec::fill(&mut out.values, |k| {
            self.values[k] + scale * other.values[k]
        });
        out
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        let mut out = self.clone();
        exec::fill(&mut out.values, |k| factor * self.values[k]);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> GridFunction {
        let mut out = self.clone();
        exec::fill(&mut out.values, |k| f(self.values[k]));
        out
    }
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("n_h", &self.n_h)
            .field("min", &self.min())
            .field("max", &self.max())
            .finish()
    }
}

/// The four one-sided differences at every node, component order
/// `(q₁, q₂, q₃, q₄) = ((D₁⁺u)_{i,j}, (D₁⁺u)_{i−1,j}, (D₂⁺u)_{i,j}, (D₂⁺u)_{i,j−1})`.
#[derive(Clone, PartialEq)]
pub struct VectorField4 {
    n_h: usize,
    values: Vec<[f64; 4]>,
}

impl VectorField4 {
    pub(crate) fn from_values(n_h: usize, values: Vec<[f64; 4]>) -> Self {
        debug_assert_eq!(values.len(), n_h * n_h);
        Self { n_h, values }
    }

    #[inline]
    pub fn n_h(&self) -> usize {
        self.n_h
    }

    #[inline]
    pub fn values(&self) -> &[[f64; 4]] {
        &self.values
    }

    /// Components at in-range `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [f64; 4] {
        self.values[i * self.n_h + j]
    }

    /// Periodic access.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> [f64; 4] {
        let n = self.n_h as isize;
        self.get(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize)
    }
}

impl fmt::Debug for VectorField4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField4").field("n_h", &self.n_h).finish()
    }
}

/// Time-indexed family of grid functions, slices `n = 0..=n_t`.
#[derive(Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    slices: Vec<GridFunction>,
}

impl Trajectory {
    pub fn new(dt: f64, slices: Vec<GridFunction>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(MfgError::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if slices.len() < 2 {
            return Err(MfgError::invalid(
                "slices",
                format!("need at least 2 time slices, got {}", slices.len()),
            ));
        }
        let n_h = slices[0].n_h();
        if slices.iter().any(|s| s.n_h() != n_h) {
            return Err(MfgError::invalid("slices", "mixed grid sizes"));
        }
        Ok(Self { dt, slices })
    }

    /// Trajectory with every slice equal to `slice`.
    pub fn replicate(dt: f64, n_t: usize, slice: &GridFunction) -> Result<Self> {
        Self::new(dt, vec![slice.clone(); n_t + 1])
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time steps `N_T` (one less than the slice count).
    #[inline]
    pub fn n_t(&self) -> usize {
        self.slices.len() - 1
    }

    #[inline]
    pub fn n_h(&self) -> usize {
        self.slices[0].n_h()
    }

    #[inline]
    pub fn slice(&self, n: usize) -> &GridFunction {
        &self.slices[n]
    }

    #[inline]
    pub fn slice_mut(&mut self, n: usize) -> &mut GridFunction {
        &mut self.slices[n]
    }

    pub fn slices(&self) -> &[GridFunction] {
        &self.slices
    }

    /// Largest pointwise distance to `other` over all slices.
    pub fn linf_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.slices.len(), other.slices.len());
        self.slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.sub(b).linf_norm())
            .fold(0.0, f64::max)
    }

    /// `max_n ‖self^n − other^n‖_{L¹}`, the fixed-point convergence metric.
    pub fn sup_l1_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.slices.len(), other.slices.len());
        self.slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.sub(b).l1_norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("n_h", &self.n_h())
            .field("n_t", &self.n_t())
            .field("dt", &self.dt)
            .finish()
    }
}
