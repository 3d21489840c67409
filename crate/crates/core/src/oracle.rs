//! Brute-force reference solvers for small groups.
//!
//! These check the closed-form solver from the outside: a candidate
//! announcement is feasible at level `beta` when every defined posterior
//! confidence, on both outcome channels, stays within `beta` and the
//! fidelity intervals hold. The grid oracle enumerates announcements over a
//! per-member grid and returns the best level any of them achieves; the
//! bisection oracle searches the level axis the way a generic
//! linear-fractional solver would, deciding each level by grid feasibility.
//!
//! The oracle shares no formulas with the solver. Its grids do include the
//! interval endpoints and the anchor thresholds `P(x^a) bound_min / p_k`,
//! where the optimal announcements are known to sit, so agreement with the
//! closed form is exact on most instances despite the coarse grid.

use crate::dataset::QidGroup;
use crate::error::{OracleError, SolveError};
use crate::fidelity::Interval;

/// Grid spacing for the enumeration.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { step: 0.005 }
    }
}

/// Result of a grid enumeration.
#[derive(Clone, Debug)]
pub struct GridOracleResult {
    /// Best (smallest) group max confidence over the enumerated grid.
    /// Never below the true optimum.
    pub beta_grid: f64,
    /// An announcement achieving `beta_grid`.
    pub witness: Vec<f64>,
    /// Crude bound on `beta_grid - beta_star` from the confidence
    /// function's modulus over one grid cell around the witness.
    pub gap_bound: f64,
}

const TOL: f64 = 1e-9;
const MAX_MEMBERS: usize = 4;

/// Checks a candidate announcement against privacy level `beta`,
/// the fidelity intervals, and the probability range.
pub fn feasibility_check(g: &QidGroup, bounds: &[Interval], candidate: &[f64], beta: f64) -> bool {
    assert_eq!(candidate.len(), g.len(), "one value per member");
    for (v, iv) in candidate.iter().zip(bounds) {
        if !(0.0..=1.0).contains(v) || !iv.contains(*v, TOL) {
            return false;
        }
    }
    for a in [0u8, 1u8] {
        let mut denom = 0.0;
        let mut worst = 0.0f64;
        for (m, &v) in g.members.iter().zip(candidate) {
            let joint = m.p * if a == 1 { v } else { 1.0 - v };
            denom += joint;
            worst = worst.max(joint);
        }
        if denom > 0.0 && worst > beta * denom + TOL {
            return false;
        }
    }
    true
}

fn member_grid(g: &QidGroup, bounds: &[Interval], step: f64) -> Vec<Vec<f64>> {
    // Anchor thresholds: the largest P(x) * lower-bound product per channel.
    let tau_pos = g
        .members
        .iter()
        .zip(bounds)
        .map(|(m, iv)| m.p * iv.lo)
        .fold(0.0f64, f64::max);
    let tau_neg = g
        .members
        .iter()
        .zip(bounds)
        .map(|(m, iv)| m.p * (1.0 - iv.hi))
        .fold(0.0f64, f64::max);

    g.members
        .iter()
        .zip(bounds)
        .map(|(m, iv)| {
            let mut pts = Vec::new();
            let mut v = iv.lo;
            while v < iv.hi - 1e-12 {
                pts.push(v);
                v += step;
            }
            pts.push(iv.hi);
            for extra in [tau_pos / m.p, 1.0 - tau_neg / m.p, m.d] {
                if extra >= iv.lo - 1e-12 && extra <= iv.hi + 1e-12 {
                    pts.push(extra.clamp(iv.lo, iv.hi));
                }
            }
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            pts
        })
        .collect()
}

fn check_size(g: &QidGroup, spec: GridSpec) -> Result<(), OracleError> {
    assert!(
        spec.step > 0.0 && spec.step <= 0.5,
        "grid step must be in (0, 0.5]"
    );
    if g.len() > MAX_MEMBERS {
        return Err(OracleError::TooLarge { m: g.len() });
    }
    Ok(())
}

fn validate(g: &QidGroup, bounds: &[Interval], spec: GridSpec) -> Result<(), OracleError> {
    check_size(g, spec)?;
    for (k, iv) in bounds.iter().enumerate() {
        if iv.lo > iv.hi || iv.lo.is_nan() || iv.hi.is_nan() {
            return Err(SolveError::EmptyBounds {
                record: g.members[k].record,
                lo: iv.lo,
                hi: iv.hi,
            }
            .into());
        }
    }
    Ok(())
}

/// Enumerates announcements on the grid and returns the smallest achieved
/// group max confidence with a witness.
pub fn grid_oracle(
    g: &QidGroup,
    bounds: &[Interval],
    spec: GridSpec,
) -> Result<GridOracleResult, OracleError> {
    validate(g, bounds, spec)?;
    let grids = member_grid(g, bounds, spec.step);
    let m = g.len();
    let p: Vec<f64> = g.members.iter().map(|m| m.p).collect();

    let mut scan = GridScan {
        p: &p,
        grids: &grids,
        current: vec![0.0; m],
        best: f64::INFINITY,
        witness: vec![0.0; m],
    };
    scan.minimize(0, ChannelSums::default());
    let (best, witness) = (scan.best, scan.witness);

    // Modulus of the confidence ratio when every coordinate moves by at
    // most one grid cell.
    let mut denom_min = f64::INFINITY;
    for a in [0u8, 1u8] {
        let denom: f64 = g
            .members
            .iter()
            .zip(&witness)
            .map(|(m, &v)| m.p * if a == 1 { v } else { 1.0 - v })
            .sum();
        if denom > 0.0 {
            denom_min = denom_min.min(denom);
        }
    }
    let gap_bound = 2.0 * spec.step * g.group_mass / denom_min;

    Ok(GridOracleResult {
        beta_grid: best,
        witness,
        gap_bound,
    })
}

/// Running joint-mass sums and maxima for both outcome channels.
#[derive(Clone, Copy, Default)]
struct ChannelSums {
    sum_x: f64,
    max_x: f64,
    sum_y: f64,
    max_y: f64,
}

impl ChannelSums {
    fn push(self, p: f64, v: f64) -> ChannelSums {
        let jx = p * v;
        let jy = p * (1.0 - v);
        ChannelSums {
            sum_x: self.sum_x + jx,
            max_x: self.max_x.max(jx),
            sum_y: self.sum_y + jy,
            max_y: self.max_y.max(jy),
        }
    }

    fn worst_conf(self) -> f64 {
        let mut worst = 0.0f64;
        if self.sum_x > 0.0 {
            worst = worst.max(self.max_x / self.sum_x);
        }
        if self.sum_y > 0.0 {
            worst = worst.max(self.max_y / self.sum_y);
        }
        worst
    }
}

/// Depth-first enumeration over the per-member grids. Grid points are
/// within bounds by construction, so feasibility at a level is just the
/// confidence check.
struct GridScan<'a> {
    p: &'a [f64],
    grids: &'a [Vec<f64>],
    current: Vec<f64>,
    best: f64,
    witness: Vec<f64>,
}

impl GridScan<'_> {
    fn minimize(&mut self, k: usize, sums: ChannelSums) {
        if k == self.p.len() {
            let worst = sums.worst_conf();
            if worst < self.best {
                self.best = worst;
                self.witness.copy_from_slice(&self.current);
            }
            return;
        }
        for i in 0..self.grids[k].len() {
            let v = self.grids[k][i];
            self.current[k] = v;
            self.minimize(k + 1, sums.push(self.p[k], v));
        }
    }

    fn any_feasible(&mut self, k: usize, sums: ChannelSums, beta: f64) -> bool {
        if k == self.p.len() {
            return sums.worst_conf() <= beta + TOL;
        }
        for i in 0..self.grids[k].len() {
            let v = self.grids[k][i];
            if self.any_feasible(k + 1, sums.push(self.p[k], v), beta) {
                return true;
            }
        }
        false
    }
}

fn feasible_at(g: &QidGroup, grids: &[Vec<f64>], beta: f64) -> bool {
    let p: Vec<f64> = g.members.iter().map(|m| m.p).collect();
    let mut scan = GridScan {
        p: &p,
        grids,
        current: vec![0.0; g.len()],
        best: f64::INFINITY,
        witness: vec![0.0; g.len()],
    };
    scan.any_feasible(0, ChannelSums::default(), beta)
}

/// Level-axis search: bisects `beta` over `[beta_min, C*]`, deciding each
/// level by grid feasibility, and returns the smallest feasible level
/// within `tol`.
pub fn bisection_oracle(
    g: &QidGroup,
    bounds: &[Interval],
    spec: GridSpec,
    tol: f64,
) -> Result<f64, OracleError> {
    validate(g, bounds, spec)?;
    let grids = member_grid(g, bounds, spec.step);
    let bmin = crate::privacy::beta_min(g);
    let cstar = crate::privacy::c_star(g);
    if feasible_at(g, &grids, bmin) {
        return Ok(bmin);
    }
    let (mut lo, mut hi) = (bmin, cstar);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible_at(g, &grids, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
