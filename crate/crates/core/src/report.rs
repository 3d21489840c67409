//! Machine-readable report formats.
//!
//! The solve report JSON is the single source of truth for downstream
//! audits: the fairness and attack commands consume it rather than
//! re-solving. Floats are rounded to 12 significant digits before
//! serialization so identical inputs produce byte-identical reports.

use crate::dataset::WeightedDataset;
use crate::error::SolveError;
use crate::fairness::{DistanceFamily, FairnessReport, MeasureKind};
use crate::fidelity::FidelitySpec;
use crate::privacy::AnnouncedMapping;
use crate::solver::{MasterSolution, SolveCase};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Rounds to 12 significant digits.
pub fn sig12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// One member of a group in the solve report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberReport {
    /// Index of the record in the dataset.
    pub record: usize,
    /// Full attribute-value vector of the record.
    pub x: Map<String, Value>,
    pub p: f64,
    pub d: f64,
    pub d_tilde: f64,
    /// Fidelity interval on the announced rule: `[lo, hi]`.
    pub bounds: [f64; 2],
}

/// One solved group in the solve report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupReport {
    pub qid: Map<String, Value>,
    pub beta0: f64,
    pub beta1: f64,
    pub beta_p: f64,
    pub beta_min: f64,
    pub c_star: f64,
    pub beta_star: f64,
    pub case: SolveCase,
    pub achieved_conf: f64,
    pub members: Vec<MemberReport>,
}

/// Whole solve report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub beta_star: f64,
    pub fidelity: FidelitySpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metadata: Vec<String>,
    pub groups: Vec<GroupReport>,
}

impl SolveReport {
    pub fn build(
        ds: &WeightedDataset,
        spec: &FidelitySpec,
        solution: &MasterSolution,
    ) -> Result<SolveReport, SolveError> {
        let bounds = spec.bounds_for(ds)?;
        let mut metadata = Vec::new();
        let groups = solution
            .groups
            .iter()
            .map(|outcome| {
                let g = &outcome.group;
                let sol = &outcome.solution;
                for note in &sol.notes {
                    metadata.push(format!("group {}: {note}", g.label()));
                }
                let mut qid = Map::new();
                for (k, v) in &g.qid {
                    qid.insert(k.clone(), Value::String(v.clone()));
                }
                let members = g
                    .members
                    .iter()
                    .zip(&sol.d_tilde)
                    .map(|(m, &dt)| {
                        let mut x = Map::new();
                        for (attr, value) in ds
                            .schema
                            .attributes
                            .iter()
                            .zip(&ds.records[m.record].values)
                        {
                            x.insert(attr.name.clone(), Value::String(value.clone()));
                        }
                        let iv = bounds.per_record[m.record];
                        MemberReport {
                            record: m.record,
                            x,
                            p: sig12(m.p),
                            d: sig12(m.d),
                            d_tilde: sig12(dt),
                            bounds: [sig12(iv.lo), sig12(iv.hi)],
                        }
                    })
                    .collect();
                GroupReport {
                    qid,
                    beta0: sig12(sol.beta0),
                    beta1: sig12(sol.beta1),
                    beta_p: sig12(sol.beta_p),
                    beta_min: sig12(sol.beta_min),
                    c_star: sig12(sol.c_star),
                    beta_star: sig12(sol.beta_star),
                    case: sol.case,
                    achieved_conf: sig12(sol.achieved_conf),
                    members,
                }
            })
            .collect();
        Ok(SolveReport {
            beta_star: sig12(solution.beta_star),
            fidelity: spec.clone(),
            metadata,
            groups,
        })
    }

    /// Reconstructs the announced mapping over a dataset.
    pub fn mapping_for(&self, ds: &WeightedDataset) -> Result<AnnouncedMapping, SolveError> {
        let mut d_tilde = vec![f64::NAN; ds.len()];
        for g in &self.groups {
            for m in &g.members {
                if m.record >= ds.len() {
                    return Err(SolveError::BoundsLength {
                        expected: ds.len(),
                        got: m.record + 1,
                    });
                }
                d_tilde[m.record] = m.d_tilde;
            }
        }
        if d_tilde.iter().any(|v| v.is_nan()) {
            return Err(SolveError::BoundsLength {
                expected: ds.len(),
                got: self.groups.iter().map(|g| g.members.len()).sum(),
            });
        }
        Ok(AnnouncedMapping::new(d_tilde))
    }
}

/// Serializable fairness report, including the flat view an inversion
/// attack would consume.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FairnessReportWire {
    pub group_attr: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_attr: Option<String>,
    pub rates: Vec<RateWire>,
    pub measures: Vec<MeasureWire>,
    pub metadata: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inversion_view: Option<InversionView>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateWire {
    pub group: String,
    pub true_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub announced_rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureWire {
    pub measure: MeasureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    /// `null` when the value is infinite (incomparable relative metric).
    pub true_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub announced_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion_bound: Option<f64>,
    pub family: DistanceFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_bound: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incomparable: Option<bool>,
}

/// Flat two-group view of the published measures, in the shape the
/// inversion attack consumes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionView {
    pub group_attr: String,
    pub groups: Vec<String>,
    /// Published overall rates, one per group (announced when available).
    pub rates: Vec<f64>,
    pub condition_attr: String,
    pub conditions: Vec<String>,
    /// Published CSP bias per condition.
    pub csp_bias: Vec<f64>,
}

impl FairnessReportWire {
    pub fn build(report: &FairnessReport) -> Self {
        let rates: Vec<RateWire> = report
            .rates
            .iter()
            .map(|r| RateWire {
                group: r.group.clone(),
                true_rate: sig12(r.true_rate),
                announced_rate: r.announced_rate.map(sig12),
            })
            .collect();
        let measures: Vec<MeasureWire> = report
            .measures
            .iter()
            .map(|m| MeasureWire {
                measure: m.kind,
                groups: m.groups.clone(),
                condition: m.condition.clone(),
                true_value: sig12(m.true_value),
                announced_value: m.announced_value.map(sig12),
                distortion_bound: m.distortion_bound.map(sig12),
                family: m.family,
                within_bound: m.within_bound,
                incomparable: m.incomparable,
            })
            .collect();

        // A flat inversion view needs exactly two groups and CSP biases
        // over an ordered condition list.
        let inversion_view = Self::view_from(report, &measures);
        FairnessReportWire {
            group_attr: report.group_attr.clone(),
            condition_attr: report.condition_attr.clone(),
            rates,
            measures,
            metadata: report.metadata.clone(),
            inversion_view,
        }
    }

    fn view_from(report: &FairnessReport, measures: &[MeasureWire]) -> Option<InversionView> {
        if report.rates.len() != 2 {
            return None;
        }
        let condition_attr = report.condition_attr.clone()?;
        let mut conditions = Vec::new();
        let mut csp_bias = Vec::new();
        for m in measures {
            if m.measure == MeasureKind::Csp {
                if let Some(c) = &m.condition {
                    conditions.push(c.clone());
                    csp_bias.push(m.announced_value.unwrap_or(m.true_value));
                }
            }
        }
        if conditions.is_empty() {
            return None;
        }
        let rates = report
            .rates
            .iter()
            .map(|r| sig12(r.announced_rate.unwrap_or(r.true_rate)))
            .collect();
        Some(InversionView {
            group_attr: report.group_attr.clone(),
            groups: report.rates.iter().map(|r| r.group.clone()).collect(),
            rates,
            condition_attr,
            conditions,
            csp_bias,
        })
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}
