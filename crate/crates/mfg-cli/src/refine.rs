//! Grid-refinement harness: Cauchy differences between nested levels.
//!
//! With no closed-form solution available, convergence is checked by
//! comparing successive levels in an L¹(Q) metric built on the
//! piecewise-constant reconstruction: the value function is carried by
//! `u^{n+1}` on the time slab `(t_n, t_{n+1})`, the density by `m^n`, and
//! each nodal value fills the square cell centered at its node. Spatially
//! the coarse solution is prolonged onto the fine grid by cell injection;
//! in time the two levels are compared at their shared time levels (every
//! coarse level is a fine level when the step counts nest), weighted by the
//! coarse slab measure. Comparing at shared times keeps the metric zero for
//! solutions that are exact on every level, rather than polluting it with
//! the O(Δt) offset between staircase reconstructions of different steps.

use anyhow::bail;
use mfg_core::grid::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Level {
    pub n_h: usize,
    pub n_t: usize,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n_h, self.n_t)
    }
}

/// Parses `"8x8,16x16,32x32"`.
pub fn parse_levels(text: &str) -> anyhow::Result<Vec<Level>> {
    let mut levels = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let Some((n_h, n_t)) = part.split_once('x') else {
            bail!("bad level '{part}': expected <n_h>x<n_t>");
        };
        levels.push(Level {
            n_h: n_h.trim().parse()?,
            n_t: n_t.trim().parse()?,
        });
    }
    validate_levels(&levels)?;
    Ok(levels)
}

pub fn validate_levels(levels: &[Level]) -> anyhow::Result<()> {
    if levels.len() < 2 {
        bail!("need >= 2 levels for a refinement study, got {}", levels.len());
    }
    for pair in levels.windows(2) {
        if pair[1].n_h % pair[0].n_h != 0 {
            bail!(
                "levels must be nested: n_h {} does not divide {}",
                pair[0].n_h,
                pair[1].n_h
            );
        }
        if pair[1].n_t % pair[0].n_t != 0 {
            bail!(
                "levels must be nested in time: n_t {} does not divide {}",
                pair[0].n_t,
                pair[1].n_t
            );
        }
        if pair[1].n_h <= pair[0].n_h {
            bail!("levels must refine: {} then {}", pair[0], pair[1]);
        }
    }
    Ok(())
}

/// Coarse node index covering fine node `i` (fine cells inject into the
/// coarse cell containing their center; boundary ties round up).
#[inline]
fn coarse_index(i: usize, ratio: usize, n_coarse: usize) -> usize {
    ((i + ratio / 2) / ratio) % n_coarse
}

/// `‖fine − coarse‖_{L¹(Q)}`-style distance over the coarse time slabs,
/// comparing slices at shared times: slab `N` carries slice `N + shift`
/// (`shift` is 1 for the value function, 0 for the density).
fn l1q_distance(fine: &Trajectory, coarse: &Trajectory, shift: usize) -> f64 {
    let n_f = fine.n_h();
    let n_c = coarse.n_h();
    assert_eq!(n_f % n_c, 0, "grids must nest");
    assert_eq!(fine.n_t() % coarse.n_t(), 0, "time steps must nest");
    let rx = n_f / n_c;
    let rt = fine.n_t() / coarse.n_t();
    let dt_c = coarse.dt();
    let h2_f = 1.0 / (n_f * n_f) as f64;
    let mut total = 0.0;
    for slab in 0..coarse.n_t() {
        let f = fine.slice((slab + shift) * rt);
        let c = coarse.slice(slab + shift);
        let mut slab_sum = 0.0;
        for i in 0..n_f {
            let ci = coarse_index(i, rx, n_c);
            for j in 0..n_f {
                let cj = coarse_index(j, rx, n_c);
                slab_sum += (f.get(i, j) - c.get(ci, cj)).abs();
            }
        }
        total += dt_c * h2_f * slab_sum;
    }
    total
}

pub fn cauchy_difference_u(fine: &Trajectory, coarse: &Trajectory) -> f64 {
    l1q_distance(fine, coarse, 1)
}

pub fn cauchy_difference_m(fine: &Trajectory, coarse: &Trajectory) -> f64 {
    l1q_distance(fine, coarse, 0)
}

/// One row of the refinement table.
#[derive(Clone, Debug)]
pub struct RefinementRow {
    pub coarse: Level,
    pub fine: Level,
    /// Empty when either level failed to solve.
    pub diff_u: Option<f64>,
    pub diff_m: Option<f64>,
    pub ratio_u: Option<f64>,
    pub ratio_m: Option<f64>,
}

/// Builds the difference/ratio table from per-level solves (failed levels
/// are `None` and leave gaps in the table).
pub fn cauchy_table(
    levels: &[Level],
    solutions: &[Option<(Trajectory, Trajectory)>],
) -> Vec<RefinementRow> {
    assert_eq!(levels.len(), solutions.len());
    let mut rows: Vec<RefinementRow> = Vec::new();
    for k in 1..levels.len() {
        let (diff_u, diff_m) = match (&solutions[k - 1], &solutions[k]) {
            (Some((uc, mc)), Some((uf, mf))) => (
                Some(cauchy_difference_u(uf, uc)),
                Some(cauchy_difference_m(mf, mc)),
            ),
            _ => (None, None),
        };
        let previous = rows.last();
        let ratio = |now: Option<f64>, before: Option<f64>| match (now, before) {
            (Some(n), Some(b)) if b > 0.0 => Some(n / b),
            _ => None,
        };
        rows.push(RefinementRow {
            coarse: levels[k - 1],
            fine: levels[k],
            diff_u,
            diff_m,
            ratio_u: ratio(diff_u, previous.and_then(|r| r.diff_u)),
            ratio_m: ratio(diff_m, previous.and_then(|r| r.diff_m)),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfg_core::grid::GridFunction;

    #[test]
    fn level_parsing_and_validation() {
        let levels = parse_levels("8x8,16x16,32x32").unwrap();
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[1], Level { n_h: 16, n_t: 16 });
        assert!(parse_levels("8x8").is_err());
        assert!(parse_levels("8x8,12x12").is_err());
        assert!(parse_levels("junk").is_err());
    }

    #[test]
    fn injection_maps_fine_nodes_to_covering_coarse_cells() {
        // Coarse cells are centered at coarse nodes; fine node 1 of a 2:1
        // refinement sits on the boundary and rounds up.
        assert_eq!(coarse_index(0, 2, 4), 0);
        assert_eq!(coarse_index(1, 2, 4), 1);
        assert_eq!(coarse_index(2, 2, 4), 1);
        assert_eq!(coarse_index(3, 2, 4), 2);
        assert_eq!(coarse_index(7, 2, 4), 0); // wraps
    }

    #[test]
    fn identical_constant_levels_have_zero_distance() {
        let coarse = Trajectory::replicate(0.25, 2, &GridFunction::constant(4, 2.0).unwrap())
            .unwrap();
        let fine = Trajectory::replicate(0.125, 4, &GridFunction::constant(8, 2.0).unwrap())
            .unwrap();
        assert_eq!(cauchy_difference_u(&fine, &coarse), 0.0);
        assert_eq!(cauchy_difference_m(&fine, &coarse), 0.0);
    }

    #[test]
    fn distance_scales_with_a_constant_offset() {
        let coarse = Trajectory::replicate(0.5, 2, &GridFunction::constant(4, 0.0).unwrap())
            .unwrap();
        let fine = Trajectory::replicate(0.25, 4, &GridFunction::constant(8, 3.0).unwrap())
            .unwrap();
        // |3| over the whole cylinder of volume T = 1.
        assert!((cauchy_difference_m(&fine, &coarse) - 3.0).abs() <= 1e-12);
    }
}
