//! Closed-form optimal-privacy solver.
//!
//! Per QID group, the strongest privacy level compatible with the fidelity
//! intervals is the largest of four quantities: two one-sided candidates
//! (`beta1`, `beta0`) where a single outcome channel dominates, a balanced
//! candidate (`beta_p`) where both channels bind at once, and the prior
//! vulnerability `beta_min`, below which no announcement can go. The first
//! three come with explicit optimal announcements: flatten the dominating
//! channel's joint distribution up to the anchor threshold, or pin both
//! anchors and spread the remaining mass until the balance equation holds.
//! The whole-dataset optimum is the worst group optimum.
//!
//! Everything here is linear in the group size.

use crate::dataset::{partition_by_qid, QidGroup, WeightedDataset};
use crate::error::SolveError;
use crate::fidelity::{bounds_from_alpha, bounds_from_delta, FidelitySpec, Interval};
use crate::privacy::{beta_min, c_star, group_max_confidence_in, AnnouncedMapping, CONF_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which candidate attains the group optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveCase {
    #[serde(rename = "beta_0")]
    Beta0,
    #[serde(rename = "beta_1")]
    Beta1,
    BetaP,
    /// The closed-form candidates fall below the prior vulnerability; the
    /// optimum is `beta_min` itself and the announcement only has to avoid
    /// sharpening the prior.
    BetaMin,
}

/// Anchor indices and effective bounds for one group at a privacy level.
#[derive(Clone, Debug)]
pub struct SubproblemWorkspace {
    /// `anchor[a]` is the member maximizing `P(x) * bound_min_a(x)` for
    /// outcome `a`, ties broken by lowest member index.
    pub anchor: [usize; 2],
    /// `b_k = P(x_k) - beta * group_mass`; nonpositive whenever
    /// `beta >= beta_min`.
    pub b: Vec<f64>,
    /// Effective bounds on the positive channel (nested in the raw bounds
    /// for `beta >= max(beta_p, beta_min)`).
    pub x_eff: Vec<Interval>,
    /// Effective bounds on the negative channel.
    pub y_eff: Vec<Interval>,
}

/// The three closed-form candidates of one group.
#[derive(Clone, Copy, Debug)]
pub struct BetaCandidates {
    pub beta0: f64,
    pub beta1: f64,
    pub beta_p: f64,
    /// Anchor member for the positive channel (`x^1`).
    pub anchor_pos: usize,
    /// Anchor member for the negative channel (`x^0`).
    pub anchor_neg: usize,
}

/// Solved group: candidates, the optimum, and an optimal announcement.
#[derive(Clone, Debug)]
pub struct GroupSolution {
    pub beta0: f64,
    pub beta1: f64,
    pub beta_p: f64,
    pub beta_min: f64,
    pub c_star: f64,
    pub beta_star: f64,
    pub case: SolveCase,
    /// Announced rules in group member order.
    pub d_tilde: Vec<f64>,
    /// Verified maximum confidence of the announcement.
    pub achieved_conf: f64,
    /// Degenerate-candidate notes (zero anchor products and the like).
    pub notes: Vec<String>,
}

/// One solved group together with its identity.
#[derive(Clone, Debug)]
pub struct GroupOutcome {
    pub group: QidGroup,
    pub solution: GroupSolution,
}

/// Whole-dataset solution.
#[derive(Clone, Debug)]
pub struct MasterSolution {
    /// Worst group optimum.
    pub beta_star: f64,
    pub groups: Vec<GroupOutcome>,
    /// Announced rules indexed like the dataset.
    pub mapping: AnnouncedMapping,
}

fn argmax_product(g: &QidGroup, value: impl Fn(usize) -> f64) -> usize {
    let mut best = 0usize;
    let mut best_v = g.members[0].p * value(0);
    for k in 1..g.len() {
        let v = g.members[k].p * value(k);
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    best
}

/// Anchors, `b`, and effective bounds at privacy level `beta`.
pub fn compute_workspace(g: &QidGroup, bounds: &[Interval], beta: f64) -> SubproblemWorkspace {
    debug_assert_eq!(bounds.len(), g.len());
    let anchor_pos = argmax_product(g, |k| bounds[k].lo);
    let anchor_neg = argmax_product(g, |k| bounds[k].mirror().lo);
    let tau_pos = g.members[anchor_pos].p * bounds[anchor_pos].lo;
    let tau_neg = g.members[anchor_neg].p * bounds[anchor_neg].mirror().lo;

    let b: Vec<f64> = g.members.iter().map(|m| m.p - beta * g.group_mass).collect();
    let mut x_eff = Vec::with_capacity(g.len());
    let mut y_eff = Vec::with_capacity(g.len());
    for (k, m) in g.members.iter().enumerate() {
        let xb = bounds[k];
        let yb = xb.mirror();
        x_eff.push(Interval::new(
            xb.lo.max((tau_pos + b[k]) / m.p),
            xb.hi.min(tau_pos / m.p),
        ));
        y_eff.push(Interval::new(
            yb.lo.max((tau_neg + b[k]) / m.p),
            yb.hi.min(tau_neg / m.p),
        ));
    }
    SubproblemWorkspace {
        anchor: [anchor_neg, anchor_pos],
        b,
        x_eff,
        y_eff,
    }
}

/// The three closed-form candidates. A zero anchor product makes the
/// corresponding one-sided candidate 0 (that outcome can be suppressed
/// entirely, so it imposes no level).
pub fn compute_betas(g: &QidGroup, bounds: &[Interval]) -> BetaCandidates {
    let anchor_pos = argmax_product(g, |k| bounds[k].lo);
    let anchor_neg = argmax_product(g, |k| bounds[k].mirror().lo);
    let tau_pos = g.members[anchor_pos].p * bounds[anchor_pos].lo;
    let tau_neg = g.members[anchor_neg].p * bounds[anchor_neg].mirror().lo;

    let one_sided = |anchor: usize, tau: f64, lo_hi: &dyn Fn(usize) -> Interval| -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let mut denom = tau;
        for (k, m) in g.members.iter().enumerate() {
            if k == anchor {
                continue;
            }
            denom += (m.p * lo_hi(k).hi).min(tau);
        }
        tau / denom
    };

    let beta1 = one_sided(anchor_pos, tau_pos, &|k| bounds[k]);
    let beta0 = one_sided(anchor_neg, tau_neg, &|k| bounds[k].mirror());
    let beta_p = (tau_pos + tau_neg) / g.group_mass;
    BetaCandidates {
        beta0,
        beta1,
        beta_p,
        anchor_pos,
        anchor_neg,
    }
}

fn validate_bounds(g: &QidGroup, bounds: &[Interval]) -> Result<(), SolveError> {
    for (k, iv) in bounds.iter().enumerate() {
        if iv.lo > iv.hi || iv.lo.is_nan() || iv.hi.is_nan() {
            return Err(SolveError::EmptyBounds {
                record: g.members[k].record,
                lo: iv.lo,
                hi: iv.hi,
            });
        }
    }
    Ok(())
}

/// Solves one group: optimal privacy level and an optimal announcement.
pub fn solve_group(g: &QidGroup, bounds: &[Interval]) -> Result<GroupSolution, SolveError> {
    assert!(!g.is_empty(), "cannot solve an empty group");
    validate_bounds(g, bounds)?;
    let bmin = beta_min(g);
    let cstar = c_star(g);
    let cands = compute_betas(g, bounds);
    let mut notes = Vec::new();
    if g.members[cands.anchor_pos].p * bounds[cands.anchor_pos].lo <= 0.0 {
        notes.push("positive-outcome anchor product is zero; beta1 set to 0".to_string());
    }
    if g.members[cands.anchor_neg].p * bounds[cands.anchor_neg].mirror().lo <= 0.0 {
        notes.push("negative-outcome anchor product is zero; beta0 set to 0".to_string());
    }

    // A lone record is fully identified by the prior no matter what is
    // announced; skip the full solve.
    if g.len() == 1 {
        let d_tilde = vec![g.members[0].d.clamp(bounds[0].lo, bounds[0].hi)];
        let achieved = group_max_confidence_in(g, &d_tilde);
        return Ok(GroupSolution {
            beta0: cands.beta0,
            beta1: cands.beta1,
            beta_p: cands.beta_p,
            beta_min: bmin,
            c_star: cstar,
            beta_star: 1.0,
            case: SolveCase::BetaMin,
            d_tilde,
            achieved_conf: achieved,
            notes,
        });
    }

    let raw = cands.beta0.max(cands.beta1).max(cands.beta_p);
    let (beta_star, case, d_tilde) = if raw >= bmin {
        let ws = compute_workspace(g, bounds, raw);
        if raw == cands.beta0 {
            let d = ws.y_eff.iter().map(|iv| 1.0 - iv.hi).collect();
            (raw, SolveCase::Beta0, d)
        } else if raw == cands.beta1 {
            let d = ws.x_eff.iter().map(|iv| iv.hi).collect();
            (raw, SolveCase::Beta1, d)
        } else {
            let d = allocate_balanced(g, bounds, &cands, raw, &ws)?;
            (raw, SolveCase::BetaP, d)
        }
    } else {
        let d = solve_at_beta_min(g, bounds)?;
        (bmin, SolveCase::BetaMin, d)
    };

    let d_tilde: Vec<f64> = d_tilde
        .into_iter()
        .zip(bounds)
        .map(|(v, iv)| v.clamp(iv.lo, iv.hi))
        .collect();
    let achieved = group_max_confidence_in(g, &d_tilde);
    if achieved > beta_star + CONF_TOL {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: format!(
                "announcement reaches confidence {achieved}, above the optimum {beta_star}"
            ),
        });
    }
    Ok(GroupSolution {
        beta0: cands.beta0,
        beta1: cands.beta1,
        beta_p: cands.beta_p,
        beta_min: bmin,
        c_star: cstar,
        beta_star,
        case,
        d_tilde,
        achieved_conf: achieved,
        notes,
    })
}

/// Balanced-point allocation: pin both anchors at their channel lower
/// bounds, then fill the free members from their effective lower bounds, in
/// member order, until the positive channel's balance equation
/// `sum_k P(x_k) d~_k = tau_pos / beta_p` is met.
fn allocate_balanced(
    g: &QidGroup,
    bounds: &[Interval],
    cands: &BetaCandidates,
    beta_p: f64,
    ws: &SubproblemWorkspace,
) -> Result<Vec<f64>, SolveError> {
    let pi = cands.anchor_pos;
    let theta = cands.anchor_neg;
    let tau_pos = g.members[pi].p * bounds[pi].lo;
    let target_total = tau_pos / beta_p;

    let mut d = vec![f64::NAN; g.len()];
    d[pi] = bounds[pi].lo;
    if theta != pi {
        d[theta] = 1.0 - bounds[theta].mirror().lo;
    } else if (bounds[pi].lo - (1.0 - bounds[pi].mirror().lo)).abs() > 1e-9 {
        // A shared anchor is only balanced when its interval has zero
        // slack between the two channel pins.
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: "shared anchor with conflicting channel pins".to_string(),
        });
    }

    let mut resid = target_total;
    for (k, v) in d.iter().enumerate() {
        let floor = if v.is_nan() { ws.x_eff[k].lo } else { *v };
        resid -= g.members[k].p * floor;
    }
    if resid < -CONF_TOL {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: format!("balance residual {resid} is negative"),
        });
    }
    for (k, v) in d.iter_mut().enumerate() {
        if !v.is_nan() {
            continue;
        }
        let p = g.members[k].p;
        let capacity = ws.x_eff[k].hi - ws.x_eff[k].lo;
        let alloc = (resid / p).min(capacity).max(0.0);
        *v = ws.x_eff[k].lo + alloc;
        resid -= p * alloc;
    }
    if resid > CONF_TOL {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: format!("balance residual {resid} not exhausted"),
        });
    }
    Ok(d)
}

/// A feasible announcement at the prior vulnerability itself.
///
/// At `beta = beta_min` the largest-prior members must be announced exactly
/// at the group's mean announced rule; every other member must stay under
/// the resulting joint-mass cap on both channels. A common constant rule
/// works whenever the raw intervals share a point; otherwise the mean is
/// located by a one-dimensional convex search and the remaining members are
/// filled greedily.
fn solve_at_beta_min(g: &QidGroup, bounds: &[Interval]) -> Result<Vec<f64>, SolveError> {
    let lo_all = bounds.iter().map(|iv| iv.lo).fold(0.0f64, f64::max);
    let hi_all = bounds.iter().map(|iv| iv.hi).fold(1.0f64, f64::min);
    if lo_all <= hi_all {
        let c = 0.5f64.clamp(lo_all, hi_all);
        return Ok(vec![c; g.len()]);
    }

    let mass = g.group_mass;
    let p_star = g.members.iter().map(|m| m.p).fold(0.0f64, f64::max);
    let dominant: Vec<usize> = (0..g.len()).filter(|&k| g.members[k].p == p_star).collect();
    let rest: Vec<usize> = (0..g.len()).filter(|&k| g.members[k].p != p_star).collect();
    let s_lo = dominant.iter().map(|&k| bounds[k].lo).fold(0.0f64, f64::max);
    let s_hi = dominant.iter().map(|&k| bounds[k].hi).fold(1.0f64, f64::min);
    if s_lo > s_hi {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: "dominant members have disjoint bounds at beta_min".to_string(),
        });
    }
    let dom_mass = p_star * dominant.len() as f64;

    // Channel caps for non-dominant members, as functions of the common
    // dominant value s: p_k x_k <= p* s and p_k (1-x_k) <= p* (1-s).
    let member_iv = |k: usize, s: f64| -> Interval {
        let r = p_star / g.members[k].p;
        Interval::new(
            bounds[k].lo.max(1.0 - r * (1.0 - s)),
            bounds[k].hi.min(r * s),
        )
    };
    // Convex infeasibility score: <= 0 iff s admits a completion.
    let score = |s: f64| -> f64 {
        let target = s * (mass - dom_mass);
        let mut worst = f64::NEG_INFINITY;
        let mut lo_sum = 0.0;
        let mut hi_sum = 0.0;
        for &k in &rest {
            let iv = member_iv(k, s);
            worst = worst.max(iv.lo - iv.hi);
            lo_sum += g.members[k].p * iv.lo;
            hi_sum += g.members[k].p * iv.hi;
        }
        worst.max(lo_sum - target).max(target - hi_sum)
    };

    let tol = 1e-12;
    let (mut a, mut b) = (s_lo, s_hi);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if score(m1) <= score(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let s_best = 0.5 * (a + b);
    if score(s_best) > tol {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: "no feasible announcement found at beta_min".to_string(),
        });
    }
    // Feasible s values form an interval around s_best; pick the feasible
    // point closest to the dominant members' true rule.
    let left = if score(s_lo) <= tol {
        s_lo
    } else {
        let (mut bad, mut good) = (s_lo, s_best);
        for _ in 0..100 {
            let mid = 0.5 * (bad + good);
            if score(mid) <= tol {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let right = if score(s_hi) <= tol {
        s_hi
    } else {
        let (mut good, mut bad) = (s_best, s_hi);
        for _ in 0..100 {
            let mid = 0.5 * (good + bad);
            if score(mid) <= tol {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let s = g.members[dominant[0]].d.clamp(left, right);

    let mut d = vec![f64::NAN; g.len()];
    for &k in &dominant {
        d[k] = s;
    }
    let mut resid = s * (mass - dom_mass);
    for &k in &rest {
        let iv = member_iv(k, s);
        resid -= g.members[k].p * iv.lo;
    }
    for &k in &rest {
        let iv = member_iv(k, s);
        let p = g.members[k].p;
        let alloc = (resid / p).min(iv.hi - iv.lo).max(0.0);
        d[k] = iv.lo + alloc;
        resid -= p * alloc;
    }
    if resid.abs() > CONF_TOL {
        return Err(SolveError::InternalInfeasible {
            group: g.label(),
            detail: format!("beta_min completion residual {resid}"),
        });
    }
    Ok(d)
}

/// Solves every group independently and takes the worst optimum.
///
/// Group solves run in parallel on the current rayon pool; the result is
/// assembled in group order and does not depend on scheduling.
pub fn solve_master(ds: &WeightedDataset, spec: &FidelitySpec) -> Result<MasterSolution, SolveError> {
    let bounds = spec.bounds_for(ds)?;
    let groups = partition_by_qid(ds);
    let solutions: Vec<GroupSolution> = groups
        .par_iter()
        .map(|g| {
            solve_group(g, &bounds.for_group(g)).map_err(|e| SolveError::Group {
                group: g.label(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut d_tilde = vec![0.0; ds.len()];
    for (g, sol) in groups.iter().zip(&solutions) {
        for (m, &v) in g.members.iter().zip(&sol.d_tilde) {
            d_tilde[m.record] = v;
        }
    }
    let beta_star = solutions.iter().map(|s| s.beta_star).fold(0.0, f64::max);
    Ok(MasterSolution {
        beta_star,
        groups: groups
            .into_iter()
            .zip(solutions)
            .map(|(group, solution)| GroupOutcome { group, solution })
            .collect(),
        mapping: AnnouncedMapping::new(d_tilde),
    })
}

/// Fidelity family swept by [`tradeoff_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Delta,
    Alpha,
}

/// Optimal privacy across an evenly spaced fidelity grid for one group.
///
/// For the delta family the endpoints are `beta_min` (at 0) and `C*`
/// (at 1), and the curve is nondecreasing.
pub fn tradeoff_sweep(
    g: &QidGroup,
    kind: SweepKind,
    steps: usize,
) -> Result<Vec<(f64, f64)>, SolveError> {
    assert!(steps >= 2, "a sweep needs at least the two endpoints");
    let mut curve = Vec::with_capacity(steps);
    for i in 0..steps {
        let v = i as f64 / (steps - 1) as f64;
        let bounds: Vec<Interval> = g
            .members
            .iter()
            .map(|m| match kind {
                SweepKind::Delta => bounds_from_delta(m.d, v),
                SweepKind::Alpha => bounds_from_alpha(m.d, v),
            })
            .collect();
        let sol = solve_group(g, &bounds)?;
        curve.push((v, sol.beta_star));
    }
    Ok(curve)
}
