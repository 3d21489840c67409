//! Individual and group fairness measures on decision mappings, and the
//! distortion the privacy perturbation can introduce into them.
//!
//! Group measures compare expected positive rates between protected groups,
//! as a difference (statistical parity, optionally conditioned on a score
//! band) or a ratio (p%-rule). Individual fairness checks the Lipschitz
//! property: similar records should receive similar decision distributions.
//! Measures based on total variation absorb at most `min(2(1-delta), 1)`
//! perturbation under delta-fidelity; relative-metric measures absorb at
//! most `min(-2 ln alpha, 1)` under alpha-fidelity.

use crate::dataset::WeightedDataset;
use crate::error::FairnessError;
use crate::fidelity::{bias_distortion_bound, FidelitySpec};
use serde::{Deserialize, Serialize};

/// Conjunction of attribute-value constraints selecting records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSelector {
    pub constraints: Vec<(String, String)>,
}

impl GroupSelector {
    pub fn new<S: Into<String>>(constraints: Vec<(S, S)>) -> Self {
        GroupSelector {
            constraints: constraints
                .into_iter()
                .map(|(a, v)| (a.into(), v.into()))
                .collect(),
        }
    }

    pub fn label(&self) -> String {
        self.constraints
            .iter()
            .map(|(a, v)| format!("{a}={v}"))
            .collect::<Vec<_>>()
            .join(" & ")
    }

    pub fn matches(&self, ds: &WeightedDataset, record: usize) -> bool {
        self.constraints
            .iter()
            .all(|(attr, value)| ds.value_of(record, attr) == Some(value.as_str()))
    }

    fn with(&self, attr: &str, value: &str) -> GroupSelector {
        let mut c = self.constraints.clone();
        c.push((attr.to_string(), value.to_string()));
        GroupSelector { constraints: c }
    }
}

/// Expected announced positive rate over the selected records,
/// `E[d(X) | T_sel]`.
pub fn group_rate(ds: &WeightedDataset, rules: &[f64], sel: &GroupSelector) -> Result<f64, FairnessError> {
    let mut mass = 0.0;
    let mut weighted = 0.0;
    for (i, &rule) in rules.iter().enumerate() {
        if sel.matches(ds, i) {
            mass += ds.p(i);
            weighted += ds.p(i) * rule;
        }
    }
    if mass <= 0.0 {
        return Err(FairnessError::EmptySelection(sel.label()));
    }
    Ok(weighted / mass)
}

/// Statistical-parity bias: `|rate(sel1) - rate(sel2)|`.
pub fn sp_bias(
    ds: &WeightedDataset,
    rules: &[f64],
    sel1: &GroupSelector,
    sel2: &GroupSelector,
) -> Result<f64, FairnessError> {
    Ok((group_rate(ds, rules, sel1)? - group_rate(ds, rules, sel2)?).abs())
}

/// p%-rule ratio: `rate(sel1) / rate(sel2)`. A decision rule complies with
/// the p%-rule iff `p <= ratio <= 1/p`.
pub fn p_rule_ratio(
    ds: &WeightedDataset,
    rules: &[f64],
    sel1: &GroupSelector,
    sel2: &GroupSelector,
) -> Result<f64, FairnessError> {
    let r1 = group_rate(ds, rules, sel1)?;
    let r2 = group_rate(ds, rules, sel2)?;
    if r2 <= 0.0 {
        return Err(FairnessError::ZeroDenominator(sel2.label()));
    }
    Ok(r1 / r2)
}

/// Distance family used to compare two decision distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFamily {
    /// Total variation with `1/|A|` normalization; for binary decisions
    /// this collapses to `|d1 - d2|`.
    TotalVariation,
    /// Relative l-infinity metric `sup_a |ln(Z1(a)/Z2(a))|`; sensitive to
    /// zero probabilities.
    RelativeInf,
}

/// Total variation between two binary decision distributions, with the
/// `1/|A|` normalization.
pub fn tv_distance(d1: f64, d2: f64) -> f64 {
    0.5 * ((d1 - d2).abs() + ((1.0 - d1) - (1.0 - d2)).abs())
}

/// Relative l-infinity distance between two binary decision distributions.
/// Infinite when exactly one side of an outcome has zero probability.
pub fn rel_inf_distance(d1: f64, d2: f64) -> f64 {
    let mut worst = 0.0f64;
    for (z1, z2) in [(d1, d2), (1.0 - d1, 1.0 - d2)] {
        if z1 == 0.0 && z2 == 0.0 {
            continue;
        }
        if z1 == 0.0 || z2 == 0.0 {
            return f64::INFINITY;
        }
        worst = worst.max((z1 / z2).max(z2 / z1).ln());
    }
    worst
}

/// Normalized Hamming distance between two records: differing attributes
/// divided by attribute count. A reasonable default when no domain metric
/// is given.
pub fn normalized_hamming(ds: &WeightedDataset, i: usize, j: usize) -> f64 {
    let a = &ds.records[i].values;
    let b = &ds.records[j].values;
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    diff as f64 / a.len() as f64
}

/// Worst individual-fairness violation over all record pairs.
#[derive(Clone, Debug)]
pub struct ViolationReport {
    /// `max over pairs of D(D~(x1), D~(x2)) - dist(x1, x2) - eps`;
    /// nonpositive means the mapping is compliant.
    pub violation: f64,
    pub worst_pair: (usize, usize),
    /// Set when the relative metric hit a zero probability; the pair is
    /// then incomparable rather than merely unfair.
    pub incomparable: bool,
}

/// Scans all record pairs for Lipschitz violations under the given record
/// metric and distance family.
pub fn individual_fairness_violation(
    ds: &WeightedDataset,
    rules: &[f64],
    metric: &dyn Fn(&WeightedDataset, usize, usize) -> f64,
    family: DistanceFamily,
    epsilon: f64,
) -> ViolationReport {
    let mut worst = f64::NEG_INFINITY;
    let mut pair = (0, 0);
    let mut incomparable = false;
    for i in 0..ds.len() {
        for j in (i + 1)..ds.len() {
            let dist = match family {
                DistanceFamily::TotalVariation => tv_distance(rules[i], rules[j]),
                DistanceFamily::RelativeInf => rel_inf_distance(rules[i], rules[j]),
            };
            if dist.is_infinite() {
                incomparable = true;
            }
            let v = dist - metric(ds, i, j) - epsilon;
            if v > worst {
                worst = v;
                pair = (i, j);
            }
        }
    }
    if ds.len() < 2 {
        worst = 0.0;
    }
    ViolationReport {
        violation: worst,
        worst_pair: pair,
        incomparable,
    }
}

/// Which measures a fairness audit should compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Sp,
    Csp,
    Pr,
    Individual,
}

/// Audit request: a protected attribute, an optional score condition, and
/// the measures to compute.
#[derive(Clone, Debug)]
pub struct FairnessRequest {
    /// Protected attribute whose values define the compared groups.
    pub group_attr: String,
    /// Score attribute for conditional statistical parity.
    pub condition_attr: Option<String>,
    /// Condition values; `None` means every value of `condition_attr`.
    pub condition_values: Option<Vec<String>>,
    pub measures: Vec<MeasureKind>,
    /// Lipschitz slack for individual fairness.
    pub epsilon: f64,
    /// Distance family for individual fairness.
    pub family: DistanceFamily,
}

/// One measured fairness quantity on the true and announced mappings.
#[derive(Clone, Debug)]
pub struct MeasureEntry {
    pub kind: MeasureKind,
    /// Compared group values (for group measures).
    pub groups: Option<(String, String)>,
    /// Condition value (for CSP).
    pub condition: Option<String>,
    pub true_value: f64,
    pub announced_value: Option<f64>,
    /// Worst-case `|announced - true|` from the fidelity spec, when the
    /// measure's family matches the spec's family.
    pub distortion_bound: Option<f64>,
    pub family: DistanceFamily,
    /// Whether the observed distortion respects the bound.
    pub within_bound: Option<bool>,
    /// Set on individual-fairness entries when the relative metric hit a
    /// zero probability: the worst pair is incomparable, not merely
    /// unfair, and the value is infinite.
    pub incomparable: Option<bool>,
}

/// Per-group announced and true rates.
#[derive(Clone, Debug)]
pub struct RateEntry {
    pub group: String,
    pub true_rate: f64,
    pub announced_rate: Option<f64>,
}

/// Fairness audit on the true and announced mappings.
#[derive(Clone, Debug)]
pub struct FairnessReport {
    pub group_attr: String,
    pub condition_attr: Option<String>,
    pub rates: Vec<RateEntry>,
    pub measures: Vec<MeasureEntry>,
    /// Notes on conventions: logarithm base, normalization choices.
    pub metadata: Vec<String>,
}

fn family_of(kind: MeasureKind, request_family: DistanceFamily) -> DistanceFamily {
    match kind {
        MeasureKind::Sp | MeasureKind::Csp => DistanceFamily::TotalVariation,
        MeasureKind::Pr => DistanceFamily::RelativeInf,
        MeasureKind::Individual => request_family,
    }
}

fn bound_for(spec: Option<&FidelitySpec>, family: DistanceFamily) -> Option<f64> {
    let spec = spec?;
    let matches = matches!(
        (spec, family),
        (FidelitySpec::Delta { .. }, DistanceFamily::TotalVariation)
            | (FidelitySpec::Alpha { .. }, DistanceFamily::RelativeInf)
    );
    if matches {
        bias_distortion_bound(spec).ok()
    } else {
        None
    }
}

/// Computes the requested measures on the true mapping and, when given, the
/// announced mapping, attaching the fidelity spec's distortion bound where
/// its family applies.
pub fn fairness_report(
    ds: &WeightedDataset,
    true_rules: &[f64],
    announced: Option<&[f64]>,
    spec: Option<&FidelitySpec>,
    request: &FairnessRequest,
) -> Result<FairnessReport, FairnessError> {
    let attr_idx = ds
        .schema
        .index_of(&request.group_attr)
        .ok_or_else(|| FairnessError::UnknownAttribute(request.group_attr.clone()))?;
    let group_values = ds.schema.attributes[attr_idx].domain.clone();
    let base = GroupSelector { constraints: vec![] };

    let mut rates = Vec::new();
    for v in &group_values {
        let sel = base.with(&request.group_attr, v);
        rates.push(RateEntry {
            group: v.clone(),
            true_rate: group_rate(ds, true_rules, &sel)?,
            announced_rate: announced.map(|m| group_rate(ds, m, &sel)).transpose()?,
        });
    }

    let condition_values: Vec<String> = match (&request.condition_attr, &request.condition_values) {
        (Some(attr), Some(vals)) => {
            ds.schema
                .index_of(attr)
                .ok_or_else(|| FairnessError::UnknownAttribute(attr.clone()))?;
            vals.clone()
        }
        (Some(attr), None) => {
            let idx = ds
                .schema
                .index_of(attr)
                .ok_or_else(|| FairnessError::UnknownAttribute(attr.clone()))?;
            ds.schema.attributes[idx].domain.clone()
        }
        (None, _) => Vec::new(),
    };

    let mut measures = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..group_values.len() {
        for j in (i + 1)..group_values.len() {
            pairs.push((group_values[i].clone(), group_values[j].clone()));
        }
    }

    for kind in &request.measures {
        let family = family_of(*kind, request.family);
        let bound = bound_for(spec, family);
        match kind {
            MeasureKind::Sp | MeasureKind::Pr => {
                for (v1, v2) in &pairs {
                    let s1 = base.with(&request.group_attr, v1);
                    let s2 = base.with(&request.group_attr, v2);
                    let (t, a) = match kind {
                        MeasureKind::Sp => (
                            sp_bias(ds, true_rules, &s1, &s2)?,
                            announced.map(|m| sp_bias(ds, m, &s1, &s2)).transpose()?,
                        ),
                        _ => (
                            p_rule_ratio(ds, true_rules, &s1, &s2)?,
                            announced.map(|m| p_rule_ratio(ds, m, &s1, &s2)).transpose()?,
                        ),
                    };
                    measures.push(entry(*kind, Some((v1.clone(), v2.clone())), None, t, a, bound, family));
                }
            }
            MeasureKind::Csp => {
                let attr = request
                    .condition_attr
                    .as_ref()
                    .ok_or(FairnessError::MissingCondition)?;
                for w in &condition_values {
                    for (v1, v2) in &pairs {
                        let s1 = base.with(&request.group_attr, v1).with(attr, w);
                        let s2 = base.with(&request.group_attr, v2).with(attr, w);
                        let t = sp_bias(ds, true_rules, &s1, &s2)?;
                        let a = announced.map(|m| sp_bias(ds, m, &s1, &s2)).transpose()?;
                        measures.push(entry(
                            *kind,
                            Some((v1.clone(), v2.clone())),
                            Some(w.clone()),
                            t,
                            a,
                            bound,
                            family,
                        ));
                    }
                }
            }
            MeasureKind::Individual => {
                let t = individual_fairness_violation(
                    ds,
                    true_rules,
                    &normalized_hamming,
                    request.family,
                    request.epsilon,
                );
                let a = announced.map(|m| {
                    individual_fairness_violation(
                        ds,
                        m,
                        &normalized_hamming,
                        request.family,
                        request.epsilon,
                    )
                });
                let incomparable =
                    t.incomparable || a.as_ref().map(|r| r.incomparable).unwrap_or(false);
                let mut e = entry(
                    *kind,
                    None,
                    None,
                    t.violation,
                    a.map(|r| r.violation),
                    bound,
                    family,
                );
                e.incomparable = Some(incomparable);
                if incomparable {
                    e.within_bound = None;
                }
                measures.push(e);
            }
        }
    }

    Ok(FairnessReport {
        group_attr: request.group_attr.clone(),
        condition_attr: request.condition_attr.clone(),
        rates,
        measures,
        metadata: vec![
            "logarithms are natural (base e)".to_string(),
            "total variation uses the 1/|A| normalization; for binary decisions it equals |d1 - d2|"
                .to_string(),
            "p%-rule values are plain rate ratios; their distortion bound applies on the log-ratio scale"
                .to_string(),
        ],
    })
}

fn entry(
    kind: MeasureKind,
    groups: Option<(String, String)>,
    condition: Option<String>,
    true_value: f64,
    announced_value: Option<f64>,
    distortion_bound: Option<f64>,
    family: DistanceFamily,
) -> MeasureEntry {
    // The p%-rule is reported as a plain ratio, but its fidelity bound
    // lives on the log-ratio scale (the relative metric). Compare there.
    let distortion = |t: f64, a: f64| match kind {
        MeasureKind::Pr => {
            if t > 0.0 && a > 0.0 && t.is_finite() && a.is_finite() {
                Some((a.ln() - t.ln()).abs())
            } else {
                None
            }
        }
        _ => Some((a - t).abs()),
    };
    let within_bound = match (announced_value, distortion_bound) {
        (Some(a), Some(b)) => distortion(true_value, a).map(|d| d <= b + 1e-9),
        _ => None,
    };
    MeasureEntry {
        kind,
        groups,
        condition,
        true_value,
        announced_value,
        distortion_bound,
        family,
        within_bound,
        incomparable: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset, SchemaRoles};

    const TABLE_CSV: &str = "\
income,gender,count,d
<100k,F,139,0
100k~200k,F,9,0
>200k,F,2,1
<100k,M,117,0
100k~200k,M,18,0.5
>200k,M,5,1
";

    fn table() -> WeightedDataset {
        parse_dataset(TABLE_CSV, &SchemaRoles::new(vec!["gender"], vec!["income"])).unwrap()
    }

    fn sel(pairs: Vec<(&str, &str)>) -> GroupSelector {
        GroupSelector::new(pairs)
    }

    #[test]
    fn rates_match_published_table() {
        let ds = table();
        let rules = ds.rules();
        let f = group_rate(&ds, &rules, &sel(vec![("gender", "F")])).unwrap();
        let m = group_rate(&ds, &rules, &sel(vec![("gender", "M")])).unwrap();
        assert!((f - 2.0 / 150.0).abs() < 1e-12);
        assert!((f - 0.0133).abs() < 1e-4);
        assert!((m - 0.10).abs() < 1e-12);
    }

    #[test]
    fn constant_rule_rate_is_the_constant() {
        let ds = table();
        let rules = vec![0.35; ds.len()];
        for g in ["F", "M"] {
            let r = group_rate(&ds, &rules, &sel(vec![("gender", g)])).unwrap();
            assert!((r - 0.35).abs() < 1e-12);
        }
    }

    #[test]
    fn sp_and_csp_match_published_table() {
        let ds = table();
        let rules = ds.rules();
        let f = sel(vec![("gender", "F")]);
        let m = sel(vec![("gender", "M")]);
        let bias = sp_bias(&ds, &rules, &f, &m).unwrap();
        assert!((bias - 0.0866).abs() < 1e-4);
        assert_eq!(sp_bias(&ds, &rules, &f, &f).unwrap(), 0.0);
        for (band, want) in [("<100k", 0.0), ("100k~200k", 0.5), (">200k", 0.0)] {
            let fb = sel(vec![("gender", "F"), ("income", band)]);
            let mb = sel(vec![("gender", "M"), ("income", band)]);
            let b = sp_bias(&ds, &rules, &fb, &mb).unwrap();
            assert!((b - want).abs() < 1e-4, "band {band}: {b} vs {want}");
        }
    }

    #[test]
    fn p_rule_matches_the_80_percent_check() {
        let ds = table();
        let rules = ds.rules();
        let ratio = p_rule_ratio(
            &ds,
            &rules,
            &sel(vec![("gender", "F")]),
            &sel(vec![("gender", "M")]),
        )
        .unwrap();
        assert!((ratio - 0.13333).abs() < 1e-4);
        assert!(ratio < 0.8, "fails the 80% rule");
        let same = p_rule_ratio(
            &ds,
            &rules,
            &sel(vec![("gender", "F")]),
            &sel(vec![("gender", "F")]),
        )
        .unwrap();
        assert!((same - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let ds = table();
        let rules = ds.rules();
        let err = group_rate(&ds, &rules, &sel(vec![("gender", "X")])).unwrap_err();
        assert!(matches!(err, FairnessError::EmptySelection(_)));
    }

    #[test]
    fn zero_rate_denominator_is_an_error() {
        let ds = table();
        let rules = vec![0.0; ds.len()];
        let err = p_rule_ratio(
            &ds,
            &rules,
            &sel(vec![("gender", "F")]),
            &sel(vec![("gender", "M")]),
        )
        .unwrap_err();
        assert!(matches!(err, FairnessError::ZeroDenominator(_)));
    }

    #[test]
    fn binary_tv_collapses_to_rule_difference() {
        for (a, b) in [(0.0, 1.0), (0.3, 0.8), (0.5, 0.5)] {
            assert!((tv_distance(a, b) - (a - b).abs()).abs() < 1e-15);
            assert!((tv_distance(a, b) - tv_distance(b, a)).abs() < 1e-15);
        }
        assert_eq!(tv_distance(0.25, 0.25), 0.0);
    }

    #[test]
    fn identical_mappings_have_no_violation() {
        let ds = table();
        let rules = vec![0.5; ds.len()];
        let v = individual_fairness_violation(
            &ds,
            &rules,
            &normalized_hamming,
            DistanceFamily::TotalVariation,
            0.0,
        );
        assert!(v.violation <= 0.0);
    }

    #[test]
    fn opposite_rules_at_zero_distance_violate_maximally() {
        let csv = "g,s,count,d\na,x,1,1\na,x2,1,0\n";
        let ds = parse_dataset(csv, &SchemaRoles::new(vec!["g"], vec!["s"])).unwrap();
        let v = individual_fairness_violation(
            &ds,
            &[1.0, 0.0],
            &|_, _, _| 0.0,
            DistanceFamily::TotalVariation,
            0.0,
        );
        assert!((v.violation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_group_has_positive_violation_under_hamming() {
        let csv = "\
income,gender,count,d
<100k,F,12,0
100k~200k,F,5,0
>200k,F,3,1
";
        let ds = parse_dataset(csv, &SchemaRoles::new(vec!["gender"], vec!["income"])).unwrap();
        let v = individual_fairness_violation(
            &ds,
            &ds.rules(),
            &normalized_hamming,
            DistanceFamily::TotalVariation,
            0.0,
        );
        assert!(v.violation > 0.0);
        assert_eq!(v.worst_pair, (0, 2));
        assert!((v.violation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rel_inf_flags_zero_probabilities() {
        assert!(rel_inf_distance(0.0, 0.5).is_infinite());
        assert_eq!(rel_inf_distance(0.0, 0.0), 0.0);
        // Channels: 0.4/0.8 gives ln 2, 0.6/0.2 gives ln 3; the sup wins.
        let d = rel_inf_distance(0.4, 0.8);
        assert!((d - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_pairs_are_flagged_incomparable() {
        let csv = "g,s,count,d\na,x,1,0\na,y,1,0.5\n";
        let ds = parse_dataset(csv, &SchemaRoles::new(vec!["g"], vec!["s"])).unwrap();
        let request = FairnessRequest {
            group_attr: "g".to_string(),
            condition_attr: None,
            condition_values: None,
            measures: vec![MeasureKind::Individual],
            epsilon: 0.0,
            family: DistanceFamily::RelativeInf,
        };
        let report = fairness_report(&ds, &ds.rules(), None, None, &request).unwrap();
        let m = &report.measures[0];
        assert_eq!(m.incomparable, Some(true));
        assert!(m.true_value.is_infinite());
    }

    #[test]
    fn p_rule_bound_is_checked_on_the_log_scale() {
        let csv = "g,s,count,d\na,x,1,0.4\nb,y,1,0.08\n";
        let ds = parse_dataset(csv, &SchemaRoles::new(vec!["g"], vec!["s"])).unwrap();
        let alpha = 0.9;
        // Worst multiplicative spread: one rate up by 1/alpha, one down by
        // alpha. The raw ratio moves far beyond the bound; the log ratio
        // moves exactly to it.
        let announced = vec![0.4 / alpha, 0.08 * alpha];
        let request = FairnessRequest {
            group_attr: "g".to_string(),
            condition_attr: None,
            condition_values: None,
            measures: vec![MeasureKind::Pr],
            epsilon: 0.0,
            family: DistanceFamily::RelativeInf,
        };
        let spec = FidelitySpec::alpha(alpha);
        let report =
            fairness_report(&ds, &ds.rules(), Some(&announced), Some(&spec), &request).unwrap();
        let pr = &report.measures[0];
        assert!((pr.true_value - 5.0).abs() < 1e-12);
        let raw_diff = (pr.announced_value.unwrap() - pr.true_value).abs();
        let bound = pr.distortion_bound.unwrap();
        assert!(raw_diff > bound, "raw ratios move beyond the log-scale bound");
        assert_eq!(pr.within_bound, Some(true));
    }

    #[test]
    fn report_reproduces_published_measures_and_bounds() {
        let ds = table();
        let request = FairnessRequest {
            group_attr: "gender".to_string(),
            condition_attr: Some("income".to_string()),
            condition_values: None,
            measures: vec![MeasureKind::Sp, MeasureKind::Csp],
            epsilon: 0.0,
            family: DistanceFamily::TotalVariation,
        };
        let spec = FidelitySpec::delta(0.9);
        let rules = ds.rules();
        let report = fairness_report(&ds, &rules, Some(&rules), Some(&spec), &request).unwrap();
        assert_eq!(report.rates.len(), 2);
        let sp = &report.measures[0];
        assert!((sp.true_value - 0.0866).abs() < 1e-4);
        assert_eq!(sp.distortion_bound.map(|b| (b - 0.2).abs() < 1e-12), Some(true));
        assert_eq!(sp.within_bound, Some(true));
        // Identity announcement: measured bias equals true bias.
        for m in &report.measures {
            assert_eq!(m.announced_value, Some(m.true_value));
        }
        assert_eq!(report.measures.len(), 1 + 3);
    }
}
