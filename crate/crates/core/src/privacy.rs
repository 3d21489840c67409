//! Adversary inference confidence and the privacy measures built on it.
//!
//! An adversary who knows a target's public record and received decision,
//! plus the joint input distribution, forms a Bayesian posterior over the
//! sensitive values in the target's QID group. The posterior confidence of
//! member `k` given outcome `a` under announced mapping `m` is
//!
//! ```text
//! conf(k, a) = P(x_k) m_a(x_k) / sum_{x' in T} P(x') m_a(x')
//! ```
//!
//! An outcome whose denominator is zero never occurs in the group; it is no
//! inference channel at all and such confidences are undefined rather than
//! zero.

use crate::dataset::{QidGroup, WeightedDataset};
use crate::error::MetricError;

/// Absolute tolerance used when comparing confidences against a threshold.
pub const CONF_TOL: f64 = 1e-9;

/// The announced (perturbed) decision rules, indexed like the dataset.
#[derive(Clone, Debug)]
pub struct AnnouncedMapping {
    pub d_tilde: Vec<f64>,
}

impl AnnouncedMapping {
    pub fn new(d_tilde: Vec<f64>) -> Self {
        debug_assert!(d_tilde.iter().all(|v| (0.0..=1.0).contains(v)));
        AnnouncedMapping { d_tilde }
    }

    /// The true mapping of a dataset, unperturbed.
    pub fn identity(ds: &WeightedDataset) -> Self {
        AnnouncedMapping { d_tilde: ds.rules() }
    }

    /// Announced rules for the members of a group, in group order.
    pub fn group_values(&self, g: &QidGroup) -> Vec<f64> {
        g.members.iter().map(|m| self.d_tilde[m.record]).collect()
    }
}

/// Probability that outcome `a` is announced for a rule value.
#[inline]
pub fn channel(d_tilde: f64, a: u8) -> f64 {
    if a == 1 {
        d_tilde
    } else {
        1.0 - d_tilde
    }
}

/// Posterior confidence of inferring member `k` of `g` from outcome `a`,
/// given group-local announced rules `vals`. `None` when the outcome never
/// occurs in the group.
pub fn confidence_in(g: &QidGroup, vals: &[f64], k: usize, a: u8) -> Result<Option<f64>, MetricError> {
    if k >= g.len() {
        return Err(MetricError::IndexOutOfGroup {
            index: k,
            size: g.len(),
        });
    }
    let denom: f64 = g
        .members
        .iter()
        .zip(vals)
        .map(|(m, &v)| m.p * channel(v, a))
        .sum();
    if denom <= 0.0 {
        return Ok(None);
    }
    Ok(Some(g.members[k].p * channel(vals[k], a) / denom))
}

/// [`confidence_in`] with a dataset-indexed mapping.
pub fn confidence(
    g: &QidGroup,
    m: &AnnouncedMapping,
    k: usize,
    a: u8,
) -> Result<Option<f64>, MetricError> {
    confidence_in(g, &m.group_values(g), k, a)
}

/// Highest defined confidence over the group's members and outcomes.
///
/// Evaluated on the true mapping this is `C*`, the vulnerability of
/// releasing the rules unperturbed.
pub fn group_max_confidence_in(g: &QidGroup, vals: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for a in [0u8, 1u8] {
        let denom: f64 = g
            .members
            .iter()
            .zip(vals)
            .map(|(m, &v)| m.p * channel(v, a))
            .sum();
        if denom <= 0.0 {
            continue;
        }
        for (m, &v) in g.members.iter().zip(vals) {
            best = best.max(m.p * channel(v, a) / denom);
        }
    }
    best
}

/// [`group_max_confidence_in`] with a dataset-indexed mapping.
pub fn group_max_confidence(g: &QidGroup, m: &AnnouncedMapping) -> f64 {
    group_max_confidence_in(g, &m.group_values(g))
}

/// Maximum posterior confidence of the true mapping (`C*`).
pub fn c_star(g: &QidGroup) -> f64 {
    group_max_confidence_in(g, &g.rules())
}

/// The privacy limit of a group: the adversary's best prior guess,
/// `max_k P(x_k | T)`. No announcement can push confidence below it.
pub fn beta_min(g: &QidGroup) -> f64 {
    debug_assert!(g.group_mass > 0.0);
    g.members
        .iter()
        .map(|m| m.p / g.group_mass)
        .fold(0.0, f64::max)
}

/// Result of checking a mapping against a confidence threshold.
#[derive(Clone, Debug)]
pub struct BetaCheck {
    pub ok: bool,
    /// `(member index, outcome)` pairs whose confidence exceeds beta.
    pub violations: Vec<(usize, u8)>,
}

/// Checks whether every defined confidence stays within `beta` (absolute
/// tolerance [`CONF_TOL`]).
pub fn check_beta_in(g: &QidGroup, vals: &[f64], beta: f64) -> BetaCheck {
    let mut violations = Vec::new();
    for k in 0..g.len() {
        for a in [0u8, 1u8] {
            if let Some(c) = confidence_in(g, vals, k, a).expect("k in range") {
                if c > beta + CONF_TOL {
                    violations.push((k, a));
                }
            }
        }
    }
    BetaCheck {
        ok: violations.is_empty(),
        violations,
    }
}

/// [`check_beta_in`] with a dataset-indexed mapping.
pub fn check_beta(g: &QidGroup, m: &AnnouncedMapping, beta: f64) -> BetaCheck {
    check_beta_in(g, &m.group_values(g), beta)
}

/// Minimum uncertainty of the group under a mapping: `-ln(max confidence)`.
/// A gamma-minimum-uncertainty requirement is exactly an
/// `exp(-gamma)`-maximum-confidence requirement.
pub fn min_uncertainty_in(g: &QidGroup, vals: &[f64]) -> f64 {
    let c = group_max_confidence_in(g, vals);
    debug_assert!(c > 0.0, "group max confidence is positive for any mapping");
    -c.ln()
}

/// [`min_uncertainty_in`] with a dataset-indexed mapping.
pub fn min_uncertainty(g: &QidGroup, m: &AnnouncedMapping) -> f64 {
    min_uncertainty_in(g, &m.group_values(g))
}

/// One confidence entry of an audit report.
#[derive(Clone, Debug)]
pub struct ConfidenceEntry {
    pub group: usize,
    pub member: usize,
    pub outcome: u8,
    pub conf: f64,
}

/// Full confidence audit of a mapping over all groups.
#[derive(Clone, Debug)]
pub struct ConfidenceReport {
    pub entries: Vec<ConfidenceEntry>,
    /// Highest defined confidence per group.
    pub group_max: Vec<f64>,
    /// Highest confidence over the whole dataset.
    pub global_max: f64,
}

/// Audits a mapping: every defined confidence, per-group maxima, and the
/// global maximum.
pub fn confidence_report(groups: &[QidGroup], m: &AnnouncedMapping) -> ConfidenceReport {
    let mut entries = Vec::new();
    let mut group_max = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let vals = m.group_values(g);
        let mut best: f64 = 0.0;
        for k in 0..g.len() {
            for a in [0u8, 1u8] {
                if let Some(conf) = confidence_in(g, &vals, k, a).expect("k in range") {
                    best = best.max(conf);
                    entries.push(ConfidenceEntry {
                        group: gi,
                        member: k,
                        outcome: a,
                        conf,
                    });
                }
            }
        }
        group_max.push(best);
    }
    let global_max = group_max.iter().copied().fold(0.0, f64::max);
    ConfidenceReport {
        entries,
        group_max,
        global_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::QidGroup;

    fn female_group() -> QidGroup {
        QidGroup::from_parts(&[0.3, 0.125, 0.075], &[0.0, 0.0, 1.0])
    }

    fn male_group() -> QidGroup {
        QidGroup::from_parts(&[0.225, 0.175, 0.1], &[0.0, 0.5, 1.0])
    }

    #[test]
    fn solved_female_mapping_hits_announced_confidence() {
        let g = female_group();
        let vals = [0.1, 0.02, 0.9];
        let c = confidence_in(&g, &vals, 0, 0).unwrap().unwrap();
        assert!((c - 0.675).abs() < 1e-12);
        let c = confidence_in(&g, &vals, 2, 1).unwrap().unwrap();
        assert!((c - 0.675).abs() < 1e-12);
    }

    #[test]
    fn census_posterior_for_male_high_income() {
        // Census statistics as the prior, true rules as the likelihood.
        let g = QidGroup::from_parts(&[0.842, 0.123, 0.035], &[0.0, 0.5, 1.0]);
        let c = confidence_in(&g, &g.rules(), 2, 1).unwrap().unwrap();
        assert!((c - 0.035 / (0.123 * 0.5 + 0.035)).abs() < 1e-12);
        assert!((c - 0.363).abs() < 5e-3);
    }

    #[test]
    fn uniform_rule_posterior_equals_prior() {
        let g = QidGroup::from_parts(&[0.5, 0.5], &[0.3, 0.8]);
        for k in 0..2 {
            for a in [0, 1] {
                let c = confidence_in(&g, &[0.5, 0.5], k, a).unwrap().unwrap();
                assert!((c - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_denominator_is_undefined() {
        let g = QidGroup::from_parts(&[0.6, 0.4], &[0.0, 0.0]);
        assert_eq!(confidence_in(&g, &[0.0, 0.0], 0, 1).unwrap(), None);
        assert!(confidence_in(&g, &[0.0, 0.0], 0, 0).unwrap().is_some());
    }

    #[test]
    fn index_out_of_group_is_an_error() {
        let g = female_group();
        assert!(matches!(
            confidence_in(&g, &[0.0, 0.0, 1.0], 3, 1),
            Err(MetricError::IndexOutOfGroup { .. })
        ));
    }

    #[test]
    fn c_star_matches_worked_groups() {
        assert!((c_star(&female_group()) - 1.0).abs() < 1e-12);
        assert!((c_star(&male_group()) - 0.72).abs() < 1e-12);
    }

    #[test]
    fn constant_rule_reveals_only_the_prior() {
        let g = male_group();
        let vals = [0.37, 0.37, 0.37];
        assert!((group_max_confidence_in(&g, &vals) - beta_min(&g)).abs() < 1e-12);
    }

    #[test]
    fn beta_min_matches_worked_groups() {
        assert!((beta_min(&female_group()) - 0.6).abs() < 1e-12);
        assert!((beta_min(&male_group()) - 0.45).abs() < 1e-12);
        let singleton = QidGroup::from_parts(&[0.2], &[0.5]);
        assert!((beta_min(&singleton) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_check_flags_the_binding_channels() {
        let g = female_group();
        let vals = [0.1, 0.02, 0.9];
        assert!(check_beta_in(&g, &vals, 0.675).ok);
        let check = check_beta_in(&g, &vals, 0.674);
        assert!(!check.ok);
        assert_eq!(check.violations, vec![(0, 0), (2, 1)]);
        assert!(check_beta_in(&g, &vals, 1.0).ok);
    }

    #[test]
    fn min_uncertainty_is_negative_log_confidence() {
        let g = female_group();
        let vals = [0.1, 0.02, 0.9];
        assert!((min_uncertainty_in(&g, &vals) - (-0.675f64.ln())).abs() < 1e-12);
        assert!((-0.675f64.ln() - 0.3930).abs() < 1e-4);
        assert_eq!(min_uncertainty_in(&g, &g.rules()), 0.0);
        // A constant rule leaves the prior; make the largest prior exactly 1/e.
        let e_inv = (-1.0f64).exp();
        let g2 = QidGroup::from_parts(&[e_inv, e_inv, 1.0 - 2.0 * e_inv], &[0.5, 0.5, 0.5]);
        assert!((min_uncertainty_in(&g2, &[0.5, 0.5, 0.5]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_covers_every_defined_channel() {
        // Synthetic groups index records positionally; shift the second
        // group onto records 3..6 of the shared mapping.
        let mut male = male_group();
        for (i, m) in male.members.iter_mut().enumerate() {
            m.record = 3 + i;
        }
        let groups = vec![female_group(), male];
        let m = AnnouncedMapping::new(vec![0.1, 0.02, 0.9, 0.1, 0.4, 0.9]);
        let report = confidence_report(&groups, &m);
        assert_eq!(report.entries.len(), 12);
        assert!((report.group_max[0] - 0.675).abs() < 1e-12);
        assert!((report.global_max - 0.675).abs() < 1e-12);
    }
}
