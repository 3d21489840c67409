//! `atrp` — privacy-aware release of algorithmic transparency reports.
//!
//! Subcommands: `solve` (optimal perturbed rules), `tradeoff`
//! (privacy-fidelity curves), `audit` (confidence report), `fairness`
//! (parity measures with distortion bounds), `attack` (posterior and
//! inversion simulations), `verify` (closed form vs brute-force oracle).
//!
//! Exit codes: 0 success, 1 I/O or usage error, 2 infeasible fidelity or a
//! failed verification gap. Set `ATRP_LOG=debug|info|warn|error` for
//! stderr diagnostics.

use anyhow::{anyhow, bail, Context, Result};
use atrp_core::attack::{
    fairness_inversion, posterior_distribution, InversionInput, RuleTable, SideInformation,
};
use atrp_core::dataset::{load_dataset, partition_by_qid, SchemaRoles};
use atrp_core::fairness::{DistanceFamily, FairnessRequest, MeasureKind};
use atrp_core::oracle::{grid_oracle, GridSpec};
use atrp_core::privacy::{check_beta, confidence_report, AnnouncedMapping};
use atrp_core::report::{sig12, to_json_string, FairnessReportWire, InversionView, SolveReport};
use atrp_core::solver::{solve_group, solve_master, tradeoff_sweep, SweepKind};
use atrp_core::{FidelitySpec, SolveError, WeightedDataset};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod log;

#[derive(Parser)]
#[command(name = "atrp", version, about = "Privacy-aware transparency report toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Dataset CSV: one column per attribute plus `count` and `d`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Run configuration JSON (schema roles, fidelity spec).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for group solves (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed echoed into reports for reproducible pipelines.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal perturbed decision mapping.
    Solve,
    /// Privacy-fidelity trade-off curves per QID group (CSV).
    Tradeoff {
        /// Number of evenly spaced fidelity values (>= 2).
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Confidence report for the true or an announced mapping.
    Audit {
        /// Solve report whose announced mapping should be audited.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also check the mapping against this confidence threshold.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Fairness measures on the true and announced mappings.
    Fairness {
        /// Solve report carrying the announced mapping.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Protected attribute whose values define the groups.
        #[arg(long = "group-by")]
        group_by: String,
        /// Condition attribute, optionally fixed to one value
        /// (`attr` or `attr=value`).
        #[arg(long)]
        condition: Option<String>,
        /// Comma-separated measures: sp,csp,pr,individual.
        #[arg(long, default_value = "sp,csp,pr")]
        measures: String,
        /// Lipschitz slack for individual fairness.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Distance family for individual fairness: tv or rel-inf.
        #[arg(long, default_value = "tv")]
        family: String,
    },
    /// Inference attack simulations.
    Attack {
        #[command(subcommand)]
        attack: AttackCommand,
    },
    /// Compare the closed form against the brute-force oracle per group.
    Verify {
        /// Grid spacing for the oracle.
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        /// Largest tolerated |closed - grid| gap.
        #[arg(long, default_value_t = 0.01)]
        gap_tol: f64,
    },
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Bayes posterior over sensitive values for a target.
    Posterior {
        /// Side-information CSV (default: empirical from the dataset).
        #[arg(long)]
        side: Option<PathBuf>,
        /// Attack the announced rules of this solve report instead of the
        /// true rules.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Target public values, `attr=value`, one per public attribute.
        #[arg(long = "public", required = true)]
        public: Vec<String>,
        /// Observed decision outcome (0 or 1).
        #[arg(long)]
        outcome: u8,
    },
    /// Reconstruct a rule table from published fairness measures.
    Invert {
        /// Fairness report JSON to invert (needs its inversion view).
        #[arg(long = "fairness-report")]
        fairness_report: PathBuf,
        /// Side-information CSV (default: empirical from the dataset).
        #[arg(long)]
        side: Option<PathBuf>,
        /// Group value of the disclosed cell.
        #[arg(long = "known-group")]
        known_group: String,
        /// Condition value of the disclosed cell.
        #[arg(long = "known-condition")]
        known_condition: String,
        /// Disclosed rule value.
        #[arg(long = "known-value")]
        known_value: f64,
        /// How far outside [0, 1] a branch may land before rejection.
        #[arg(long, default_value_t = atrp_core::attack::DEFAULT_SLACK)]
        slack: f64,
    },
}

#[derive(serde::Deserialize)]
struct ConfigFile {
    schema: SchemaSection,
    fidelity: Option<FidelitySpec>,
    /// Optional alternate distribution for attack simulation.
    side_info: Option<PathBuf>,
}

#[derive(serde::Deserialize)]
struct SchemaSection {
    public: Vec<String>,
    sensitive: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Infeasible fidelity maps to 2, everything else to 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(solve) = cause.downcast_ref::<SolveError>() {
            let mut e = solve;
            loop {
                match e {
                    SolveError::EmptyBounds { .. } | SolveError::InternalInfeasible { .. } => {
                        return 2
                    }
                    SolveError::Group { source, .. } => e = source,
                    _ => break,
                }
            }
        }
    }
    1
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Solve => cmd_solve(&cli.common),
        Command::Tradeoff { steps } => cmd_tradeoff(&cli.common, steps),
        Command::Audit { report, beta } => cmd_audit(&cli.common, report.as_deref(), beta),
        Command::Fairness {
            report,
            group_by,
            condition,
            measures,
            epsilon,
            family,
        } => cmd_fairness(
            &cli.common,
            report.as_deref(),
            &group_by,
            condition.as_deref(),
            &measures,
            epsilon,
            &family,
        ),
        Command::Attack { attack } => cmd_attack(&cli.common, attack),
        Command::Verify { step, gap_tol } => cmd_verify(&cli.common, step, gap_tol),
    }
}

fn load_config(common: &Common) -> Result<ConfigFile> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config is required"))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn load_data(common: &Common, config: &ConfigFile) -> Result<WeightedDataset> {
    let path = common
        .data
        .as_ref()
        .ok_or_else(|| anyhow!("--data is required"))?;
    let roles = SchemaRoles::new(config.schema.public.clone(), config.schema.sensitive.clone());
    let ds = load_dataset(path, &roles)
        .with_context(|| format!("loading dataset {}", path.display()))?;
    log::info(&format!(
        "loaded {} records, total population {}",
        ds.len(),
        ds.total
    ));
    Ok(ds)
}

fn fidelity_of(config: &ConfigFile) -> Result<FidelitySpec> {
    config
        .fidelity
        .clone()
        .ok_or_else(|| anyhow!("config has no `fidelity` section"))
}

fn write_output(common: &Common, content: &str) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<SolveReport> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

fn cmd_solve(common: &Common) -> Result<ExitCode> {
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    let spec = fidelity_of(&config)?;
    let solution = solve_master(&ds, &spec)?;
    let mut report = SolveReport::build(&ds, &spec, &solution)?;
    if let Some(seed) = common.seed {
        report.metadata.push(format!("seed: {seed}"));
    }
    log::info(&format!("overall beta_star = {}", solution.beta_star));
    write_output(common, &to_json_string(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_tradeoff(common: &Common, steps: usize) -> Result<ExitCode> {
    if steps < 2 {
        bail!("--steps must be at least 2");
    }
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    let kind = match fidelity_of(&config)? {
        FidelitySpec::Delta { .. } => SweepKind::Delta,
        FidelitySpec::Alpha { .. } => SweepKind::Alpha,
        FidelitySpec::Explicit { .. } => {
            bail!("trade-off sweeps need a parametric fidelity family (delta or alpha)")
        }
    };
    let groups = partition_by_qid(&ds);
    let curves: Vec<Vec<(f64, f64)>> = groups
        .iter()
        .map(|g| tradeoff_sweep(g, kind, steps))
        .collect::<Result<_, _>>()?;

    let mut csv = String::from("fidelity");
    for g in &groups {
        csv.push(',');
        csv.push_str(&g.label());
    }
    csv.push_str(",overall\n");
    for i in 0..steps {
        let v = curves[0][i].0;
        csv.push_str(&format!("{}", sig12(v)));
        let mut overall = 0.0f64;
        for curve in &curves {
            let beta = curve[i].1;
            overall = overall.max(beta);
            csv.push_str(&format!(",{}", sig12(beta)));
        }
        csv.push_str(&format!(",{}\n", sig12(overall)));
    }
    write_output(common, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(common: &Common, report: Option<&Path>, beta: Option<f64>) -> Result<ExitCode> {
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    let mapping = match report {
        Some(path) => load_report(path)?.mapping_for(&ds)?,
        None => AnnouncedMapping::identity(&ds),
    };
    let groups = partition_by_qid(&ds);
    let audit = confidence_report(&groups, &mapping);

    let mut group_sections = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let entries: Vec<Value> = audit
            .entries
            .iter()
            .filter(|e| e.group == gi)
            .map(|e| {
                json!({
                    "member": e.member,
                    "record": g.members[e.member].record,
                    "outcome": e.outcome,
                    "conf": sig12(e.conf),
                })
            })
            .collect();
        let mut section = Map::new();
        section.insert("qid".into(), Value::String(g.label()));
        section.insert("beta_min".into(), json!(sig12(atrp_core::beta_min(g))));
        section.insert("c_star".into(), json!(sig12(atrp_core::c_star(g))));
        section.insert("max_conf".into(), json!(sig12(audit.group_max[gi])));
        if let Some(b) = beta {
            let check = check_beta(g, &mapping, b);
            section.insert("beta_ok".into(), json!(check.ok));
            section.insert(
                "violations".into(),
                json!(check
                    .violations
                    .iter()
                    .map(|(k, a)| json!({"member": k, "outcome": a}))
                    .collect::<Vec<_>>()),
            );
        }
        section.insert("confidences".into(), Value::Array(entries));
        group_sections.push(Value::Object(section));
    }
    let out = json!({
        "global_max_conf": sig12(audit.global_max),
        "min_uncertainty": sig12(-audit.global_max.ln()),
        "groups": group_sections,
    });
    write_output(common, &to_json_string(&out))?;
    Ok(ExitCode::SUCCESS)
}

fn parse_measures(text: &str) -> Result<Vec<MeasureKind>> {
    text.split(',')
        .map(|m| match m.trim() {
            "sp" => Ok(MeasureKind::Sp),
            "csp" => Ok(MeasureKind::Csp),
            "pr" => Ok(MeasureKind::Pr),
            "individual" => Ok(MeasureKind::Individual),
            other => Err(anyhow!("unknown measure `{other}`")),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_fairness(
    common: &Common,
    report: Option<&Path>,
    group_by: &str,
    condition: Option<&str>,
    measures: &str,
    epsilon: f64,
    family: &str,
) -> Result<ExitCode> {
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    let (announced, spec) = match report {
        Some(path) => {
            let rep = load_report(path)?;
            (Some(rep.mapping_for(&ds)?), Some(rep.fidelity))
        }
        None => (None, config.fidelity.clone()),
    };
    let (condition_attr, condition_values) = match condition {
        Some(c) => match c.split_once('=') {
            Some((attr, value)) => (Some(attr.to_string()), Some(vec![value.to_string()])),
            None => (Some(c.to_string()), None),
        },
        None => (None, None),
    };
    let family = match family {
        "tv" => DistanceFamily::TotalVariation,
        "rel-inf" => DistanceFamily::RelativeInf,
        other => bail!("unknown distance family `{other}` (expected tv or rel-inf)"),
    };
    let request = FairnessRequest {
        group_attr: group_by.to_string(),
        condition_attr,
        condition_values,
        measures: parse_measures(measures)?,
        epsilon,
        family,
    };
    let rules = ds.rules();
    let announced_rules = announced.as_ref().map(|m| m.d_tilde.clone());
    let rep = atrp_core::fairness::fairness_report(
        &ds,
        &rules,
        announced_rules.as_deref(),
        spec.as_ref(),
        &request,
    )?;
    let wire = FairnessReportWire::build(&rep);
    write_output(common, &to_json_string(&wire))?;
    Ok(ExitCode::SUCCESS)
}

fn side_information(
    common: &Common,
    config: &ConfigFile,
    ds: &WeightedDataset,
    side: Option<&Path>,
    public_attrs: &[String],
    sensitive_attrs: &[String],
) -> Result<SideInformation> {
    let path = side.map(Path::to_path_buf).or_else(|| config.side_info.clone());
    match path {
        Some(p) => {
            let base = common
                .config
                .as_ref()
                .and_then(|c| c.parent())
                .unwrap_or_else(|| Path::new("."));
            let full = if p.is_absolute() || p.exists() { p } else { base.join(p) };
            let text = std::fs::read_to_string(&full)
                .with_context(|| format!("reading side information {}", full.display()))?;
            Ok(SideInformation::from_csv(&text, public_attrs, sensitive_attrs)?)
        }
        None => {
            log::info("no side information given; using the dataset's empirical distribution");
            Ok(SideInformation::empirical(ds))
        }
    }
}

fn cmd_attack(common: &Common, attack: AttackCommand) -> Result<ExitCode> {
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    match attack {
        AttackCommand::Posterior {
            side,
            report,
            public,
            outcome,
        } => {
            if outcome > 1 {
                bail!("--outcome must be 0 or 1");
            }
            let (pub_attrs, sens_attrs) = atrp_core::attack::schema_split(&ds);
            let side =
                side_information(common, &config, &ds, side.as_deref(), &pub_attrs, &sens_attrs)?;
            let rules = match report {
                Some(path) => {
                    let mapping = load_report(&path)?.mapping_for(&ds)?;
                    RuleTable::from_rules(&ds, &mapping.d_tilde)
                }
                None => RuleTable::from_rules(&ds, &ds.rules()),
            };
            let target = ordered_values(&public, &pub_attrs)?;
            let dist = posterior_distribution(&side, &rules, &target, outcome)?;
            let entries: Vec<Value> = dist
                .iter()
                .map(|e| {
                    json!({
                        "sensitive": e.sensitive,
                        "prior": sig12(e.prior),
                        "posterior": sig12(e.posterior),
                        "amplification": sig12(e.amplification),
                    })
                })
                .collect();
            let worst = dist.iter().map(|e| e.posterior).fold(0.0f64, f64::max);
            let out = json!({
                "target_public": target,
                "outcome": outcome,
                "max_posterior": sig12(worst),
                "posteriors": entries,
            });
            write_output(common, &to_json_string(&out))?;
            Ok(ExitCode::SUCCESS)
        }
        AttackCommand::Invert {
            fairness_report,
            side,
            known_group,
            known_condition,
            known_value,
            slack,
        } => {
            let text = std::fs::read_to_string(&fairness_report)
                .with_context(|| format!("reading {}", fairness_report.display()))?;
            let wire: FairnessReportWire = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", fairness_report.display()))?;
            let view: InversionView = wire.inversion_view.ok_or_else(|| {
                anyhow!("fairness report has no inversion view (needs two groups and CSP measures)")
            })?;
            if view.groups.len() != 2 {
                bail!("inversion needs exactly two groups");
            }
            let side = side_information(
                common,
                &config,
                &ds,
                side.as_deref(),
                std::slice::from_ref(&view.group_attr),
                std::slice::from_ref(&view.condition_attr),
            )?;
            let gi = view
                .groups
                .iter()
                .position(|g| *g == known_group)
                .ok_or_else(|| anyhow!("unknown group `{known_group}`"))?;
            let ci = view
                .conditions
                .iter()
                .position(|c| *c == known_condition)
                .ok_or_else(|| anyhow!("unknown condition `{known_condition}`"))?;
            let input = InversionInput {
                group_attr: view.group_attr.clone(),
                groups: [view.groups[0].clone(), view.groups[1].clone()],
                rates: [view.rates[0], view.rates[1]],
                condition_attr: view.condition_attr.clone(),
                conditions: view.conditions.clone(),
                csp_bias: view.csp_bias.clone(),
                known: (gi, ci, known_value),
            };
            let result = fairness_inversion(&side, &input, slack)?;
            let rows = |table: &[Vec<f64>; 2]| -> Vec<Value> {
                table
                    .iter()
                    .zip(&view.groups)
                    .map(|(row, g)| {
                        json!({
                            "group": g,
                            "rules": row.iter().map(|v| sig12(*v)).collect::<Vec<_>>(),
                        })
                    })
                    .collect()
            };
            let out = json!({
                "conditions": view.conditions,
                "signs": result.signs,
                "intermediate": rows(&result.intermediate),
                "recovered": rows(&result.recovered),
                "clamped_cells": result
                    .clamped
                    .iter()
                    .map(|(i, j)| json!({"group": view.groups[*i], "condition": view.conditions[*j]}))
                    .collect::<Vec<_>>(),
                "max_posterior": sig12(result.max_posterior),
            });
            write_output(common, &to_json_string(&out))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Orders `attr=value` pairs by the given attribute list.
fn ordered_values(pairs: &[String], attrs: &[String]) -> Result<Vec<String>> {
    let mut parsed = Vec::new();
    for p in pairs {
        let (attr, value) = p
            .split_once('=')
            .ok_or_else(|| anyhow!("expected attr=value, got `{p}`"))?;
        parsed.push((attr.to_string(), value.to_string()));
    }
    attrs
        .iter()
        .map(|a| {
            parsed
                .iter()
                .find(|(attr, _)| attr == a)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| anyhow!("missing value for attribute `{a}`"))
        })
        .collect()
}

fn cmd_verify(common: &Common, step: f64, gap_tol: f64) -> Result<ExitCode> {
    let config = load_config(common)?;
    let ds = load_data(common, &config)?;
    let spec = fidelity_of(&config)?;
    let bounds = spec.bounds_for(&ds)?;
    let groups = partition_by_qid(&ds);

    let mut rows = Vec::new();
    let mut all_ok = true;
    println!(
        "{:<24} {:>4} {:>14} {:>14} {:>12}  status",
        "group", "m", "beta_closed", "beta_grid", "gap"
    );
    for g in &groups {
        let b = bounds.for_group(g);
        let sol = solve_group(g, &b)?;
        match grid_oracle(g, &b, GridSpec { step }) {
            Ok(r) => {
                let gap = (sol.beta_star - r.beta_grid).abs();
                let ok = gap <= gap_tol;
                all_ok &= ok;
                println!(
                    "{:<24} {:>4} {:>14.9} {:>14.9} {:>12.3e}  {}",
                    g.label(),
                    g.len(),
                    sol.beta_star,
                    r.beta_grid,
                    gap,
                    if ok { "ok" } else { "GAP EXCEEDED" }
                );
                rows.push(json!({
                    "group": g.label(),
                    "m": g.len(),
                    "beta_closed": sig12(sol.beta_star),
                    "beta_grid": sig12(r.beta_grid),
                    "gap": sig12(gap),
                    "gap_bound": sig12(r.gap_bound),
                    "ok": ok,
                }));
            }
            Err(atrp_core::OracleError::TooLarge { m }) => {
                println!(
                    "{:<24} {:>4} {:>14} {:>14} {:>12}  skipped (m > 4)",
                    g.label(),
                    m,
                    "-",
                    "-",
                    "-"
                );
                log::warn(&format!(
                    "group {} skipped: {m} members exceed the oracle limit",
                    g.label()
                ));
                rows.push(json!({"group": g.label(), "m": m, "skipped": true}));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if common.out.is_some() {
        write_output(
            common,
            &to_json_string(&json!({ "step": step, "gap_tol": gap_tol, "groups": rows })),
        )?;
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
