//! Weighted tabular datasets, decision rules, and quasi-identifier groups.
//!
//! A dataset row is a distinct attribute-value vector `x` with a population
//! `count` and a decision rule `d(x)`, the probability of the positive
//! decision. Probabilities `P(x) = count / total` are derived, never stored.
//! Records sharing the same public attribute values form a QID group, the
//! unit over which privacy is measured and optimized.

use crate::error::DataError;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

/// Reserved CSV column holding the population of a row.
pub const COUNT_COLUMN: &str = "count";
/// Reserved CSV column holding the decision rule of a row.
pub const RULE_COLUMN: &str = "d";

/// Visibility role of an attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Public,
    Sensitive,
}

/// Role assignment used when loading a dataset.
#[derive(Clone, Debug, Default)]
pub struct SchemaRoles {
    pub public: Vec<String>,
    pub sensitive: Vec<String>,
}

impl SchemaRoles {
    pub fn new<S: Into<String>>(public: Vec<S>, sensitive: Vec<S>) -> Self {
        Self {
            public: public.into_iter().map(Into::into).collect(),
            sensitive: sensitive.into_iter().map(Into::into).collect(),
        }
    }

    fn role_of(&self, name: &str) -> Option<Role> {
        if self.public.iter().any(|n| n == name) {
            Some(Role::Public)
        } else if self.sensitive.iter().any(|n| n == name) {
            Some(Role::Sensitive)
        } else {
            None
        }
    }
}

/// One attribute: name, observed categorical domain, role.
#[derive(Clone, Debug)]
pub struct Attribute {
    pub name: String,
    /// Distinct values in first-occurrence order.
    pub domain: Vec<String>,
    pub role: Role,
}

/// Ordered attribute list with public/sensitive roles.
#[derive(Clone, Debug)]
pub struct AttributeSchema {
    pub attributes: Vec<Attribute>,
}

impl AttributeSchema {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn public_indices(&self) -> Vec<usize> {
        self.indices_with(Role::Public)
    }

    pub fn sensitive_indices(&self) -> Vec<usize> {
        self.indices_with(Role::Sensitive)
    }

    fn indices_with(&self, role: Role) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.role == role)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A distinct record with its population and decision rule.
#[derive(Clone, Debug)]
pub struct WeightedRecord {
    pub values: Vec<String>,
    pub count: u64,
    /// Probability of the positive decision for this record.
    pub d: f64,
}

/// A loaded dataset: schema, distinct weighted records, total population.
#[derive(Clone, Debug)]
pub struct WeightedDataset {
    pub schema: AttributeSchema,
    pub records: Vec<WeightedRecord>,
    pub total: u64,
}

impl WeightedDataset {
    /// Joint probability P(x) of record `i`.
    pub fn p(&self, i: usize) -> f64 {
        self.records[i].count as f64 / self.total as f64
    }

    /// True decision rules, indexed like `records`.
    pub fn rules(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn value_of(&self, record: usize, attr: &str) -> Option<&str> {
        let idx = self.schema.index_of(attr)?;
        Some(self.records[record].values[idx].as_str())
    }
}

/// One member of a QID group.
#[derive(Clone, Copy, Debug)]
pub struct GroupMember {
    /// Index into the dataset's record list.
    pub record: usize,
    /// Joint probability P(x) of the record.
    pub p: f64,
    /// True decision rule d(x).
    pub d: f64,
}

/// All records sharing one public-attribute value vector.
#[derive(Clone, Debug)]
pub struct QidGroup {
    /// Public attribute (name, value) pairs identifying the group.
    pub qid: Vec<(String, String)>,
    /// Members in dataset order.
    pub members: Vec<GroupMember>,
    /// Sum of member probabilities.
    pub group_mass: f64,
}

impl QidGroup {
    /// Builds a free-standing group from probabilities and rules, for
    /// synthetic inputs (tests, benchmarks). Record indices are positional.
    pub fn from_parts(p: &[f64], d: &[f64]) -> Self {
        assert_eq!(p.len(), d.len());
        let members = p
            .iter()
            .zip(d)
            .enumerate()
            .map(|(i, (&p, &d))| GroupMember { record: i, p, d })
            .collect::<Vec<_>>();
        let group_mass = p.iter().sum();
        QidGroup {
            qid: Vec::new(),
            members,
            group_mass,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True rules of the members, in group order.
    pub fn rules(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.d).collect()
    }

    /// Human-readable group label, e.g. `gender=F`.
    pub fn label(&self) -> String {
        if self.qid.is_empty() {
            return "<all>".to_string();
        }
        self.qid
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("&")
    }
}

impl fmt::Display for QidGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Loads a dataset from a CSV file.
///
/// The file must have one header row naming every configured attribute plus
/// the reserved `count` and `d` columns. Duplicate value vectors are merged
/// by summing counts when their rules agree within 1e-12; disagreeing
/// duplicates are a [`DataError::ConflictingRule`].
pub fn load_dataset(path: &Path, roles: &SchemaRoles) -> Result<WeightedDataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, roles)
}

/// Parses CSV text into a dataset. See [`load_dataset`].
pub fn parse_dataset(text: &str, roles: &SchemaRoles) -> Result<WeightedDataset, DataError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DataError::ZeroTotal)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();

    let count_col = columns
        .iter()
        .position(|c| *c == COUNT_COLUMN)
        .ok_or_else(|| DataError::MissingColumn(COUNT_COLUMN.into()))?;
    let rule_col = columns
        .iter()
        .position(|c| *c == RULE_COLUMN)
        .ok_or_else(|| DataError::MissingColumn(RULE_COLUMN.into()))?;

    // Attribute columns keep header order; every one needs a role.
    let mut attributes = Vec::new();
    let mut attr_cols = Vec::new();
    for (i, name) in columns.iter().enumerate() {
        if i == count_col || i == rule_col {
            continue;
        }
        if attributes.iter().any(|a: &Attribute| a.name == *name) {
            return Err(DataError::DuplicateAttribute(name.to_string()));
        }
        let role = roles
            .role_of(name)
            .ok_or_else(|| DataError::UnassignedColumn(name.to_string()))?;
        attributes.push(Attribute {
            name: name.to_string(),
            domain: Vec::new(),
            role,
        });
        attr_cols.push(i);
    }
    for name in roles.public.iter().chain(&roles.sensitive) {
        if !attributes.iter().any(|a| a.name == *name) {
            return Err(DataError::MissingColumn(name.clone()));
        }
    }
    if !attributes.iter().any(|a| a.role == Role::Public)
        || !attributes.iter().any(|a| a.role == Role::Sensitive)
    {
        return Err(DataError::BadRoles);
    }

    let mut records: Vec<WeightedRecord> = Vec::new();
    let mut seen: HashMap<Vec<String>, usize> = HashMap::new();
    for (lineno, line) in lines {
        let row = lineno + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(DataError::BadArity {
                row,
                expected: columns.len(),
                got: fields.len(),
            });
        }
        let count: u64 = fields[count_col].parse().map_err(|_| DataError::BadCount {
            row,
            value: fields[count_col].to_string(),
        })?;
        if count == 0 {
            return Err(DataError::BadCount {
                row,
                value: fields[count_col].to_string(),
            });
        }
        let d: f64 = fields[rule_col].parse().map_err(|_| DataError::BadProbability {
            row,
            value: f64::NAN,
        })?;
        if !(0.0..=1.0).contains(&d) {
            return Err(DataError::BadProbability { row, value: d });
        }
        let values: Vec<String> = attr_cols.iter().map(|&i| fields[i].to_string()).collect();

        match seen.get(&values) {
            Some(&idx) => {
                let existing = &mut records[idx];
                if (existing.d - d).abs() > 1e-12 {
                    return Err(DataError::ConflictingRule {
                        values,
                        d1: existing.d,
                        d2: d,
                    });
                }
                existing.count += count;
            }
            None => {
                seen.insert(values.clone(), records.len());
                for (attr, value) in attributes.iter_mut().zip(&values) {
                    if !attr.domain.contains(value) {
                        attr.domain.push(value.clone());
                    }
                }
                records.push(WeightedRecord { values, count, d });
            }
        }
    }

    let total: u64 = records.iter().map(|r| r.count).sum();
    if total == 0 {
        return Err(DataError::ZeroTotal);
    }
    Ok(WeightedDataset {
        schema: AttributeSchema { attributes },
        records,
        total,
    })
}

/// Partitions the dataset into QID groups.
///
/// Groups appear in order of first occurrence; members keep dataset order,
/// which fixes all later tie-breaking.
pub fn partition_by_qid(ds: &WeightedDataset) -> Vec<QidGroup> {
    let public = ds.schema.public_indices();
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, QidGroup> = HashMap::new();

    for (i, rec) in ds.records.iter().enumerate() {
        let key: Vec<String> = public.iter().map(|&j| rec.values[j].clone()).collect();
        let member = GroupMember {
            record: i,
            p: ds.p(i),
            d: rec.d,
        };
        match groups.get_mut(&key) {
            Some(g) => {
                g.group_mass += member.p;
                g.members.push(member);
            }
            None => {
                let qid = public
                    .iter()
                    .zip(&key)
                    .map(|(&j, v)| (ds.schema.attributes[j].name.clone(), v.clone()))
                    .collect();
                order.push(key.clone());
                groups.insert(
                    key,
                    QidGroup {
                        qid,
                        group_mass: member.p,
                        members: vec![member],
                    },
                );
            }
        }
    }

    order
        .into_iter()
        .map(|key| groups.remove(&key).expect("group recorded in order"))
        .collect()
}
