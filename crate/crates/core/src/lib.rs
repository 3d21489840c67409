//! Privacy-aware release of algorithmic transparency reports.
//!
//! A transparency report that publishes a model's decision rules, or
//! fairness measures derived from them, hands an adversary a Bayesian
//! inference channel from public attributes and observed decisions to
//! sensitive attributes. This crate bounds that channel: it perturbs the
//! decision mapping as little as the requested fidelity allows while
//! minimizing the adversary's worst-case posterior confidence, using a
//! closed-form per-group optimum computed in linear time.
//!
//! The pieces:
//!
//! * [`dataset`] — weighted records, decision rules, QID groups;
//! * [`fidelity`] — additive/multiplicative/explicit perturbation budgets;
//! * [`privacy`] — inference confidence, `beta_min`, `C*`, uncertainty;
//! * [`solver`] — the closed-form optimal announcement per group;
//! * [`oracle`] — brute-force reference solvers for small groups;
//! * [`fairness`] — parity and Lipschitz measures plus distortion bounds;
//! * [`attack`] — posterior and rule-inversion attack simulations;
//! * [`report`] — machine-readable report formats.
//!
//! ```
//! use atrp_core::{parse_dataset, solve_master, FidelitySpec, SchemaRoles};
//!
//! let csv = "\
//! income,gender,count,d
//! <100k,F,12,0
//! 100k~200k,F,5,0
//! >200k,F,3,1
//! <100k,M,9,0
//! 100k~200k,M,7,0.5
//! >200k,M,4,1
//! ";
//! let roles = SchemaRoles::new(vec!["gender"], vec!["income"]);
//! let ds = parse_dataset(csv, &roles)?;
//!
//! // Allow each announced rule to move by at most 0.1 and minimize the
//! // worst posterior confidence an adversary can reach.
//! let solution = solve_master(&ds, &FidelitySpec::delta(0.9))?;
//! assert!((solution.beta_star - 0.675).abs() < 1e-9);
//! assert!((solution.mapping.d_tilde[1] - 0.02).abs() < 1e-9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod attack;
pub mod dataset;
pub mod error;
pub mod fairness;
pub mod fidelity;
pub mod oracle;
pub mod privacy;
pub mod report;
pub mod solver;

pub use dataset::{
    load_dataset, parse_dataset, partition_by_qid, AttributeSchema, QidGroup, SchemaRoles,
    WeightedDataset, WeightedRecord,
};
pub use error::{AttackError, DataError, FairnessError, MetricError, OracleError, SolveError};
pub use fidelity::{
    bias_distortion_bound, bounds_from_alpha, bounds_from_delta, FidelityBounds, FidelitySpec,
    Interval,
};
pub use privacy::{
    beta_min, c_star, check_beta, confidence, confidence_report, group_max_confidence,
    min_uncertainty, AnnouncedMapping, BetaCheck, ConfidenceReport,
};
pub use solver::{
    compute_betas, compute_workspace, solve_group, solve_master, tradeoff_sweep, GroupSolution,
    MasterSolution, SolveCase, SweepKind,
};
