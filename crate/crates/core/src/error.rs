//! Error types for dataset ingestion, solving, oracle checks, fairness
//! audits, and attack simulation.

use thiserror::Error;

/// Errors raised while loading or validating a weighted dataset.
#[derive(Error, Debug)]
pub enum DataError {
    #[error("missing column `{0}` (header must contain every configured attribute plus `count` and `d`)")]
    MissingColumn(String),
    #[error("column `{0}` in the header has no role assignment in the config")]
    UnassignedColumn(String),
    #[error("row {row}: decision rule d = {value} is outside [0, 1]")]
    BadProbability { row: usize, value: f64 },
    #[error("row {row}: count `{value}` is not a positive integer")]
    BadCount { row: usize, value: String },
    #[error("row {row}: wrong number of fields (expected {expected}, got {got})")]
    BadArity { row: usize, expected: usize, got: usize },
    #[error("duplicate record {values:?} carries conflicting rules {d1} vs {d2}")]
    ConflictingRule { values: Vec<String>, d1: f64, d2: f64 },
    #[error("dataset has zero total count")]
    ZeroTotal,
    #[error("schema needs at least one public and one sensitive attribute")]
    BadRoles,
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised while deriving fidelity bounds or solving a group.
#[derive(Error, Debug)]
pub enum SolveError {
    #[error("empty fidelity bounds for record {record}: [{lo}, {hi}]")]
    EmptyBounds { record: usize, lo: f64, hi: f64 },
    #[error("explicit bounds list has {got} entries, dataset has {expected} records")]
    BoundsLength { expected: usize, got: usize },
    #[error("distortion bound is not defined for explicit bounds")]
    UnsupportedSpec,
    #[error("internal infeasibility in group {group}: {detail}")]
    InternalInfeasible { group: String, detail: String },
    #[error("group {group}: {source}")]
    Group {
        group: String,
        #[source]
        source: Box<SolveError>,
    },
}

/// Errors raised by the privacy metrics.
#[derive(Error, Debug)]
pub enum MetricError {
    #[error("member index {index} out of group of size {size}")]
    IndexOutOfGroup { index: usize, size: usize },
}

/// Errors raised by the brute-force oracle.
#[derive(Error, Debug)]
pub enum OracleError {
    #[error("group has {m} members; the grid oracle only handles m <= 4")]
    TooLarge { m: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Errors raised by the fairness audit.
#[derive(Error, Debug)]
pub enum FairnessError {
    #[error("selector {0} matches no record")]
    EmptySelection(String),
    #[error("selector {0} has zero expected rate; ratio undefined")]
    ZeroDenominator(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("conditional measures need a condition attribute")]
    MissingCondition,
}

/// Errors raised by the attack simulations.
#[derive(Error, Debug)]
pub enum AttackError {
    #[error("outcome {outcome} has zero likelihood everywhere; posterior undefined")]
    UndefinedPosterior { outcome: u8 },
    #[error("no published rule for public record {0:?}")]
    MissingRules(String),
    #[error("side information rows for public record {public} sum to {sum}, not 1")]
    BadSideInfo { public: String, sum: f64 },
    #[error("{got} sign branches remain feasible; inversion is unresolvable without guessing")]
    Unresolvable { got: usize },
    #[error("no sign branch yields a feasible rule table")]
    NoFeasibleBranch,
    #[error("inversion supports at most 3 conditions (got {0}); larger systems are underdetermined")]
    TooManyConditions(usize),
    #[error("report is missing {0}")]
    IncompleteReport(String),
}
