//! Fidelity specifications and the per-record intervals they induce on the
//! announced rule.
//!
//! Additive (delta) fidelity allows `|d~ - d| <= 1 - delta` on both outcome
//! channels; multiplicative (alpha) fidelity allows
//! `alpha <= d~_a / d_a <= 1/alpha`. Both reduce, for binary decisions, to a
//! single interval on the announced positive rule. Explicit per-record
//! intervals encode asymmetric tolerances directly.

use crate::dataset::{QidGroup, WeightedDataset};
use crate::error::SolveError;
use serde::{Deserialize, Serialize};

/// A closed interval on the announced positive-decision probability.
/// Serializes as a `[lo, hi]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl From<[f64; 2]> for Interval {
    fn from(a: [f64; 2]) -> Self {
        Interval { lo: a[0], hi: a[1] }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// The mirrored interval for the negative outcome channel.
    pub fn mirror(&self) -> Interval {
        Interval::new(1.0 - self.hi, 1.0 - self.lo)
    }
}

/// Fidelity requirement for the perturbation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FidelitySpec {
    Delta { value: f64 },
    Alpha { value: f64 },
    Explicit { bounds: Vec<Interval> },
}

impl FidelitySpec {
    pub fn delta(value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "delta must be in [0, 1]");
        FidelitySpec::Delta { value }
    }

    pub fn alpha(value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "alpha must be in [0, 1]");
        FidelitySpec::Alpha { value }
    }

    /// Interval for one record under this spec. `record` is only used to
    /// index explicit bounds.
    pub fn interval_for(&self, d: f64, record: usize) -> Result<Interval, SolveError> {
        match self {
            FidelitySpec::Delta { value } => Ok(bounds_from_delta(d, *value)),
            FidelitySpec::Alpha { value } => Ok(bounds_from_alpha(d, *value)),
            FidelitySpec::Explicit { bounds } => {
                let iv = *bounds.get(record).ok_or(SolveError::BoundsLength {
                    expected: record + 1,
                    got: bounds.len(),
                })?;
                if !(0.0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 1.0) {
                    return Err(SolveError::EmptyBounds {
                        record,
                        lo: iv.lo,
                        hi: iv.hi,
                    });
                }
                Ok(iv)
            }
        }
    }

    /// Per-record intervals for a whole dataset.
    pub fn bounds_for(&self, ds: &WeightedDataset) -> Result<FidelityBounds, SolveError> {
        if let FidelitySpec::Explicit { bounds } = self {
            if bounds.len() != ds.len() {
                return Err(SolveError::BoundsLength {
                    expected: ds.len(),
                    got: bounds.len(),
                });
            }
        }
        let per_record = ds
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| self.interval_for(r.d, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FidelityBounds { per_record })
    }
}

/// Per-record allowed intervals for the announced positive rule.
#[derive(Clone, Debug)]
pub struct FidelityBounds {
    pub per_record: Vec<Interval>,
}

impl FidelityBounds {
    /// Intervals for the members of one group, in group order.
    pub fn for_group(&self, g: &QidGroup) -> Vec<Interval> {
        g.members.iter().map(|m| self.per_record[m.record]).collect()
    }
}

/// Interval induced by delta-fidelity: `[d - (1-delta), d + (1-delta)]`
/// clamped to [0, 1]. The bounds derived from the positive and negative
/// channels coincide for binary decisions.
pub fn bounds_from_delta(d: f64, delta: f64) -> Interval {
    let slack = 1.0 - delta;
    Interval::new((d - slack).max(0.0), (d + slack).min(1.0))
}

/// Interval induced by alpha-fidelity: the intersection of the two outcome
/// channels' ratio constraints, clamped to [0, 1].
///
/// Deterministic rules are pinned: d = 0 forces [0, 0] and d = 1 forces
/// [1, 1], for every alpha > 0 (the ratio constraint's limit at zero). This
/// makes alpha-fidelity much stiffer than delta-fidelity on deterministic
/// rules. alpha = 0 trivializes the constraint except for the pins.
pub fn bounds_from_alpha(d: f64, alpha: f64) -> Interval {
    if d == 0.0 {
        return Interval::new(0.0, 0.0);
    }
    if d == 1.0 {
        return Interval::new(1.0, 1.0);
    }
    if alpha == 0.0 {
        return Interval::new(0.0, 1.0);
    }
    // Positive channel: alpha*d <= x <= d/alpha.
    // Negative channel: alpha*(1-d) <= 1-x <= (1-d)/alpha.
    let lo = (alpha * d).max(1.0 - (1.0 - d) / alpha).max(0.0);
    let hi = (d / alpha).min(1.0 - alpha * (1.0 - d)).min(1.0);
    Interval::new(lo, hi)
}

/// Worst-case distortion of measured bias caused by the perturbation.
///
/// Delta-fidelity bounds total-variation-based measures by
/// `min(2(1-delta), 1)`; alpha-fidelity bounds relative-metric-based
/// measures by `min(-2 ln alpha, 1)`. The logarithm is natural; reports
/// carry the base so consumers are not left guessing. The cap at 1 is
/// inherited from the [0, 1] range of total-variation biases; on the log
/// scale it can bind, and then understate, only for alpha below
/// `exp(-1/2)`, far outside the near-one budgets the scheme is meant for.
pub fn bias_distortion_bound(spec: &FidelitySpec) -> Result<f64, SolveError> {
    match spec {
        FidelitySpec::Delta { value } => Ok((2.0 * (1.0 - value)).min(1.0)),
        FidelitySpec::Alpha { value } => {
            if *value == 0.0 {
                Ok(1.0)
            } else {
                Ok((-2.0 * value.ln()).min(1.0))
            }
        }
        FidelitySpec::Explicit { .. } => Err(SolveError::UnsupportedSpec),
    }
}
