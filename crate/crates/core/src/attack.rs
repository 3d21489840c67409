//! Honest-but-curious inference attacks against published reports.
//!
//! Two attacks are simulated. The posterior attack takes published decision
//! rules (true or perturbed), combines them with side information about the
//! joint distribution, and computes the adversary's Bayesian confidence in
//! a target's sensitive value given an observed decision. The inversion
//! attack reconstructs an unpublished rule table from published fairness
//! measures alone: two overall approval rates, per-condition bias values,
//! and a single disclosed cell. Sign ambiguities in the bias values are
//! resolved by rejecting branches that demand probabilities outside [0, 1];
//! mild overshoots in the surviving branch are attributed to side-info
//! mismatch, clamped, and the affected rate equation's residual is
//! reassigned to the remaining free cell.

use crate::dataset::{Role, WeightedDataset};
use crate::error::AttackError;
use std::collections::BTreeMap;

/// Tolerance for the interval pre-test of a sign branch.
const EQ_TOL: f64 = 1e-9;
/// How far outside [0, 1] a recovered cell may fall before its branch is
/// rejected outright instead of clamped.
pub const DEFAULT_SLACK: f64 = 0.25;

/// Adversary's prior: conditional distribution of sensitive values given a
/// public record.
#[derive(Clone, Debug)]
pub struct SideInformation {
    pub public_attrs: Vec<String>,
    pub sensitive_attrs: Vec<String>,
    /// `(public values, sensitive values, P(sensitive | public))`.
    pub rows: Vec<(Vec<String>, Vec<String>, f64)>,
}

impl SideInformation {
    /// Builds side information from the dataset itself: the worst-case
    /// adversary who knows the empirical joint distribution exactly.
    pub fn empirical(ds: &WeightedDataset) -> Self {
        let public: Vec<usize> = ds.schema.public_indices();
        let sensitive: Vec<usize> = ds.schema.sensitive_indices();
        let mut mass: BTreeMap<Vec<String>, u64> = BTreeMap::new();
        for r in &ds.records {
            let key: Vec<String> = public.iter().map(|&i| r.values[i].clone()).collect();
            *mass.entry(key).or_insert(0) += r.count;
        }
        let rows = ds
            .records
            .iter()
            .map(|r| {
                let pv: Vec<String> = public.iter().map(|&i| r.values[i].clone()).collect();
                let sv: Vec<String> = sensitive.iter().map(|&i| r.values[i].clone()).collect();
                let denom = mass[&pv] as f64;
                (pv, sv, r.count as f64 / denom)
            })
            .collect();
        SideInformation {
            public_attrs: public
                .iter()
                .map(|&i| ds.schema.attributes[i].name.clone())
                .collect(),
            sensitive_attrs: sensitive
                .iter()
                .map(|&i| ds.schema.attributes[i].name.clone())
                .collect(),
            rows,
        }
    }

    /// Parses side information CSV: one column per public attribute, one
    /// per sensitive attribute, and a final `probability` column holding
    /// `P(sensitive | public)`.
    pub fn from_csv(
        text: &str,
        public_attrs: &[String],
        sensitive_attrs: &[String],
    ) -> Result<Self, AttackError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| AttackError::IncompleteReport("side information header".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let col = |name: &str| -> Result<usize, AttackError> {
            header
                .iter()
                .position(|c| *c == name)
                .ok_or_else(|| AttackError::IncompleteReport(format!("side column `{name}`")))
        };
        let prob_col = col("probability")?;
        let pub_cols: Vec<usize> = public_attrs
            .iter()
            .map(|a| col(a))
            .collect::<Result<_, _>>()?;
        let sens_cols: Vec<usize> = sensitive_attrs
            .iter()
            .map(|a| col(a))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let prob: f64 = fields[prob_col]
                .parse()
                .map_err(|_| AttackError::IncompleteReport(format!("probability `{}`", fields[prob_col])))?;
            let pv = pub_cols.iter().map(|&i| fields[i].to_string()).collect();
            let sv = sens_cols.iter().map(|&i| fields[i].to_string()).collect();
            rows.push((pv, sv, prob));
        }
        let side = SideInformation {
            public_attrs: public_attrs.to_vec(),
            sensitive_attrs: sensitive_attrs.to_vec(),
            rows,
        };
        side.validate()?;
        Ok(side)
    }

    /// Conditional rows must sum to one for every public record.
    pub fn validate(&self) -> Result<(), AttackError> {
        let mut sums: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for (pv, _, prob) in &self.rows {
            *sums.entry(pv.clone()).or_insert(0.0) += prob;
        }
        for (pv, sum) in sums {
            if (sum - 1.0).abs() > 1e-6 {
                return Err(AttackError::BadSideInfo {
                    public: pv.join(","),
                    sum,
                });
            }
        }
        Ok(())
    }

    /// Prior over sensitive values for one public record.
    pub fn conditional(&self, public: &[String]) -> Vec<(Vec<String>, f64)> {
        self.rows
            .iter()
            .filter(|(pv, _, _)| pv == public)
            .map(|(_, sv, p)| (sv.clone(), *p))
            .collect()
    }
}

/// Published decision rules keyed by (public, sensitive) cell.
#[derive(Clone, Debug)]
pub struct RuleTable {
    pub cells: Vec<(Vec<String>, Vec<String>, f64)>,
}

impl RuleTable {
    /// Rule table of a dataset under the given per-record rules.
    pub fn from_rules(ds: &WeightedDataset, rules: &[f64]) -> Self {
        let public = ds.schema.public_indices();
        let sensitive = ds.schema.sensitive_indices();
        let cells = ds
            .records
            .iter()
            .zip(rules)
            .map(|(r, &d)| {
                (
                    public.iter().map(|&i| r.values[i].clone()).collect(),
                    sensitive.iter().map(|&i| r.values[i].clone()).collect(),
                    d,
                )
            })
            .collect();
        RuleTable { cells }
    }

    fn rule_for(&self, public: &[String], sensitive: &[String]) -> Option<f64> {
        self.cells
            .iter()
            .find(|(pv, sv, _)| pv == public && sv == sensitive)
            .map(|(_, _, d)| *d)
    }
}

/// One line of a posterior attack: the adversary's belief in a sensitive
/// value before and after seeing the decision.
#[derive(Clone, Debug)]
pub struct PosteriorEntry {
    pub sensitive: Vec<String>,
    pub prior: f64,
    pub posterior: f64,
    /// posterior / prior.
    pub amplification: f64,
}

/// Bayes posterior over sensitive values for a target public record and
/// observed outcome, using side information as the prior and published
/// rules as the likelihood.
pub fn posterior_distribution(
    side: &SideInformation,
    rules: &RuleTable,
    target_public: &[String],
    outcome: u8,
) -> Result<Vec<PosteriorEntry>, AttackError> {
    let prior = side.conditional(target_public);
    if prior.is_empty() {
        return Err(AttackError::IncompleteReport(format!(
            "side information for public record {}",
            target_public.join(",")
        )));
    }
    let mut joints = Vec::with_capacity(prior.len());
    let mut denom = 0.0;
    for (sv, p) in &prior {
        let d = rules
            .rule_for(target_public, sv)
            .ok_or_else(|| AttackError::MissingRules(format!("{},{}", target_public.join(","), sv.join(","))))?;
        let like = if outcome == 1 { d } else { 1.0 - d };
        joints.push(p * like);
        denom += p * like;
    }
    if denom <= 0.0 {
        return Err(AttackError::UndefinedPosterior { outcome });
    }
    Ok(prior
        .into_iter()
        .zip(joints)
        .map(|((sensitive, prior), joint)| {
            let posterior = joint / denom;
            PosteriorEntry {
                sensitive,
                prior,
                posterior,
                amplification: if prior > 0.0 { posterior / prior } else { f64::INFINITY },
            }
        })
        .collect())
}

/// Posterior confidence in one specific sensitive value.
pub fn rule_inference_confidence(
    side: &SideInformation,
    rules: &RuleTable,
    target_public: &[String],
    outcome: u8,
    target_sensitive: &[String],
) -> Result<f64, AttackError> {
    let dist = posterior_distribution(side, rules, target_public, outcome)?;
    dist.iter()
        .find(|e| e.sensitive == target_sensitive)
        .map(|e| e.posterior)
        .ok_or_else(|| AttackError::MissingRules(target_sensitive.join(",")))
}

/// The published measures an inversion attack consumes: two groups, their
/// overall rates, per-condition bias values, and one disclosed cell.
#[derive(Clone, Debug)]
pub struct InversionInput {
    pub group_attr: String,
    pub groups: [String; 2],
    /// Overall positive rates of the two groups.
    pub rates: [f64; 2],
    pub condition_attr: String,
    pub conditions: Vec<String>,
    /// `|d_{1,j} - d_{2,j}|` per condition.
    pub csp_bias: Vec<f64>,
    /// Disclosed cell: (group index, condition index, rule value).
    pub known: (usize, usize, f64),
}

/// Outcome of the inversion attack.
#[derive(Clone, Debug)]
pub struct InversionResult {
    /// Rule table as solved, before any clamping (2 x conditions).
    pub intermediate: [Vec<f64>; 2],
    /// Final recovered table, clamped into [0, 1].
    pub recovered: [Vec<f64>; 2],
    /// Cells that were clamped, as (group, condition).
    pub clamped: Vec<(usize, usize)>,
    /// Resolved sign of `d_{1,j} - d_{2,j}` per condition.
    pub signs: Vec<i8>,
    /// Worst posterior confidence the recovered table yields against any
    /// target, using the same side information.
    pub max_posterior: f64,
}

struct Branch {
    signs: Vec<i8>,
    row0: Vec<f64>,
}

/// Reconstructs the rule table from published fairness measures.
///
/// Supports the two-group-by-n-condition structure with n <= 3; larger
/// systems have more unknowns than report equations and are rejected. When
/// more than one sign branch stays feasible the ambiguity is reported, not
/// guessed.
pub fn fairness_inversion(
    side: &SideInformation,
    input: &InversionInput,
    slack: f64,
) -> Result<InversionResult, AttackError> {
    let n = input.conditions.len();
    if n > 3 {
        return Err(AttackError::TooManyConditions(n));
    }
    if input.csp_bias.len() != n {
        return Err(AttackError::IncompleteReport("one bias per condition".into()));
    }
    let (ki, kj, kv) = input.known;

    // Adversary's weights: P(condition | group) from side information.
    let mut w = [vec![0.0; n], vec![0.0; n]];
    for (i, group) in input.groups.iter().enumerate() {
        let cond = side.conditional(std::slice::from_ref(group));
        for (j, c) in input.conditions.iter().enumerate() {
            let p = cond
                .iter()
                .find(|(sv, _)| sv.len() == 1 && sv[0] == *c)
                .map(|(_, p)| *p)
                .ok_or_else(|| {
                    AttackError::IncompleteReport(format!("side information for {group},{c}"))
                })?;
            w[i][j] = p;
        }
    }

    // Enumerate sign branches for every condition with nonzero bias. Row 0
    // holds the unknowns t_j = d_{0,j}; row 1 follows the sign links
    // d_{0,j} - d_{1,j} = sign_j * bias_j.
    let branching: Vec<usize> = (0..n).filter(|&j| input.csp_bias[j] != 0.0).collect();
    let mut feasible: Vec<Branch> = Vec::new();
    for mask in 0..(1u32 << branching.len()) {
        let mut signs = vec![1i8; n];
        for (bit, &j) in branching.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                signs[j] = -1;
            }
        }
        if let Some(row0) = solve_branch(input, &w, &signs, ki, kj, kv, slack) {
            // Distinct branches can reach the same table when a bias is
            // redundant; count solutions, not sign vectors.
            if !feasible
                .iter()
                .any(|b| b.row0.iter().zip(&row0).all(|(a, c)| (a - c).abs() < 1e-9))
            {
                feasible.push(Branch { signs, row0 });
            }
        }
    }
    if feasible.is_empty() {
        return Err(AttackError::NoFeasibleBranch);
    }
    if feasible.len() > 1 {
        return Err(AttackError::Unresolvable { got: feasible.len() });
    }
    let branch = &feasible[0];

    let mut row0 = branch.row0.clone();
    let row1: Vec<f64> = (0..n)
        .map(|j| row0[j] - branch.signs[j] as f64 * input.csp_bias[j])
        .collect();
    let intermediate = [row0.clone(), row1];

    // Clamp overshoots (side-info mismatch) and reassign the affected rate
    // equation's residual to the remaining free cell of the same group, as
    // the published procedure does.
    let mut clamped = Vec::new();
    for j in 0..n {
        if j == kj && ki == 0 {
            continue;
        }
        if row0[j] < 0.0 || row0[j] > 1.0 {
            row0[j] = row0[j].clamp(0.0, 1.0);
            clamped.push((0usize, j));
            let free: Vec<usize> = (0..n)
                .filter(|&x| x != j && !(x == kj && ki == 0) && !clamped.iter().any(|&(_, c)| c == x))
                .collect();
            if free.len() == 1 {
                let fj = free[0];
                let residual: f64 = input.rates[0]
                    - (0..n)
                        .filter(|&x| x != fj)
                        .map(|x| w[0][x] * row0[x])
                        .sum::<f64>();
                row0[fj] = residual;
            }
        }
    }
    let row1: Vec<f64> = (0..n)
        .map(|j| {
            if j == kj && ki == 1 {
                kv
            } else {
                row0[j] - branch.signs[j] as f64 * input.csp_bias[j]
            }
        })
        .collect();
    let recovered = [
        row0.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>(),
        row1.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>(),
    ];

    // How dangerous is the recovered table? Worst Bayes posterior over all
    // groups, outcomes, and condition targets.
    let mut max_posterior = 0.0f64;
    for (i, _group) in input.groups.iter().enumerate() {
        for a in [0u8, 1u8] {
            let denom: f64 = (0..n)
                .map(|j| w[i][j] * channel(recovered[i][j], a))
                .sum();
            if denom <= 0.0 {
                continue;
            }
            for j in 0..n {
                max_posterior = max_posterior.max(w[i][j] * channel(recovered[i][j], a) / denom);
            }
        }
    }

    Ok(InversionResult {
        intermediate,
        recovered,
        clamped,
        signs: branch.signs.clone(),
        max_posterior,
    })
}

fn channel(d: f64, a: u8) -> f64 {
    if a == 1 {
        d
    } else {
        1.0 - d
    }
}

/// Attempts one sign branch: fixes the known cell, substitutes the links,
/// pre-tests each rate equation against its achievable interval, solves the
/// remaining linear system, and rejects solutions beyond the slack.
fn solve_branch(
    input: &InversionInput,
    w: &[Vec<f64>; 2],
    signs: &[i8],
    ki: usize,
    kj: usize,
    kv: f64,
    slack: f64,
) -> Option<Vec<f64>> {
    let n = input.conditions.len();
    // d0 at the known column.
    let d0_known = if ki == 0 {
        kv
    } else {
        kv + signs[kj] as f64 * input.csp_bias[kj]
    };
    if !(-EQ_TOL..=1.0 + EQ_TOL).contains(&d0_known) {
        return None;
    }

    // t_j range keeping both rows' cells in [0, 1].
    let t_range = |j: usize| -> (f64, f64) {
        let shift = signs[j] as f64 * input.csp_bias[j];
        ((0.0f64).max(shift), (1.0f64).min(1.0 + shift))
    };

    let unknowns: Vec<usize> = (0..n).filter(|&j| j != kj).collect();
    // Rate equations: sum_j w[i][j] * d_{i,j} = rates[i], with
    // d1j = d0j - sign_j * bias_j.
    // Row i contributes coefficient w[i][j] to t_j and a constant from the
    // known column and the sign shifts.
    let coeff = |i: usize, j: usize| w[i][j];
    let consts = |i: usize| -> f64 {
        let mut c = w[i][kj] * if i == 0 { d0_known } else { d0_known - signs[kj] as f64 * input.csp_bias[kj] };
        if i == 1 {
            for &j in &unknowns {
                c -= w[1][j] * signs[j] as f64 * input.csp_bias[j];
            }
        }
        c
    };

    // Interval pre-test: the required rate must be achievable with every
    // cell of both rows inside [0, 1].
    for i in 0..2 {
        let mut lo = consts(i);
        let mut hi = consts(i);
        for &j in &unknowns {
            let (tlo, thi) = t_range(j);
            if tlo > thi + EQ_TOL {
                return None;
            }
            lo += coeff(i, j) * tlo;
            hi += coeff(i, j) * thi;
        }
        if input.rates[i] < lo - EQ_TOL || input.rates[i] > hi + EQ_TOL {
            return None;
        }
    }

    let rhs = [input.rates[0] - consts(0), input.rates[1] - consts(1)];
    let t: Vec<f64> = match unknowns.len() {
        0 => Vec::new(),
        1 => {
            let j = unknowns[0];
            let (a0, a1) = (coeff(0, j), coeff(1, j));
            let t = if a0.abs() >= a1.abs() {
                if a0.abs() < 1e-12 {
                    return None;
                }
                rhs[0] / a0
            } else {
                rhs[1] / a1
            };
            // The other equation must agree: the system is overdetermined.
            if (a0 * t - rhs[0]).abs() > 1e-6 || (a1 * t - rhs[1]).abs() > 1e-6 {
                return None;
            }
            vec![t]
        }
        2 => {
            let (j1, j2) = (unknowns[0], unknowns[1]);
            let det = coeff(0, j1) * coeff(1, j2) - coeff(0, j2) * coeff(1, j1);
            if det.abs() < 1e-12 {
                return None;
            }
            vec![
                (rhs[0] * coeff(1, j2) - coeff(0, j2) * rhs[1]) / det,
                (coeff(0, j1) * rhs[1] - rhs[0] * coeff(1, j1)) / det,
            ]
        }
        _ => return None,
    };

    let mut row0 = vec![0.0; n];
    row0[kj] = d0_known;
    for (&j, &v) in unknowns.iter().zip(&t) {
        row0[j] = v;
    }
    // Reject grossly infeasible solutions on either row.
    for j in 0..n {
        let d1 = row0[j] - signs[j] as f64 * input.csp_bias[j];
        if row0[j] < -slack || row0[j] > 1.0 + slack || d1 < -slack || d1 > 1.0 + slack {
            return None;
        }
    }
    Some(row0)
}

/// Side information needed for attacks on a dataset: the dataset's own
/// public/sensitive split.
pub fn schema_split(ds: &WeightedDataset) -> (Vec<String>, Vec<String>) {
    let mut public = Vec::new();
    let mut sensitive = Vec::new();
    for a in &ds.schema.attributes {
        match a.role {
            Role::Public => public.push(a.name.clone()),
            Role::Sensitive => sensitive.push(a.name.clone()),
        }
    }
    (public, sensitive)
}
