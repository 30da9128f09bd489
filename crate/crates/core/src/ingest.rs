//! Long-format table I/O, the variable spec file, and original/synthetic
//! pairing.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::individual::StratumAssignment;
use crate::model::{LongDataset, Observation, SeriesValues, Value, VariableKind, VariableSpec, DEFAULT_GRID_STEP};

/// Column names of the long-format table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub subject: String,
    pub variable: String,
    pub time: String,
    pub value: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            subject: "subject_id".into(),
            variable: "variable_id".into(),
            time: "time".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableOptions {
    pub schema: ColumnSchema,
    pub delimiter: u8,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            schema: ColumnSchema::default(),
            delimiter: b',',
        }
    }
}

/// On-disk spec document (TOML).
///
/// ```toml
/// time_unit = "hours"
/// grid_step = 1.0
///
/// [variables.sbp]
/// kind = "continuous"
///
/// [variables.gcs]
/// kind = "discrete"
/// classes = ["3-8", "9-12", "13-15"]
/// grid_step = 2.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub time_unit: String,
    #[serde(default = "default_step")]
    pub grid_step: f64,
    #[serde(default)]
    pub variables: BTreeMap<String, SpecEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntry {
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_unit: Option<String>,
}

fn default_step() -> f64 {
    DEFAULT_GRID_STEP
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("spec file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn specs(&self) -> Result<Vec<VariableSpec>> {
        self.variables
            .iter()
            .map(|(id, e)| {
                let spec = VariableSpec {
                    id: id.clone(),
                    kind: e.kind,
                    classes: e.classes.clone(),
                    time_unit: e.time_unit.clone().unwrap_or_else(|| self.time_unit.clone()),
                    grid_step: e.grid_step.unwrap_or(self.grid_step),
                };
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    pub fn from_specs<'a>(specs: impl IntoIterator<Item = &'a VariableSpec>) -> Self {
        let variables = specs
            .into_iter()
            .map(|s| {
                (
                    s.id.clone(),
                    SpecEntry {
                        kind: s.kind,
                        classes: s.classes.clone(),
                        grid_step: Some(s.grid_step),
                        time_unit: (!s.time_unit.is_empty()).then(|| s.time_unit.clone()),
                    },
                )
            })
            .collect();
        Self {
            time_unit: String::new(),
            grid_step: DEFAULT_GRID_STEP,
            variables,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec file serializes")
    }
}

struct RawRow {
    line: u64,
    subject: String,
    variable: String,
    time: f64,
    value: String,
}

/// Parses a delimiter-separated long-format table.
///
/// With `specs`, every variable must be declared. Without, a variable whose
/// values all parse as numbers is continuous; otherwise it is discrete with
/// its observed labels as classes, in lexicographic order.
pub fn parse_long_table(
    source: impl Read,
    options: &TableOptions,
    specs: Option<&[VariableSpec]>,
) -> Result<LongDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let schema = &options.schema;
    let (ci_subject, ci_variable, ci_time, ci_value) = (
        column(&schema.subject)?,
        column(&schema.variable)?,
        column(&schema.time)?,
        column(&schema.value)?,
    );

    let mut rows = Vec::new();
    let mut non_finite = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(k).unwrap_or("");
        let time: f64 = field(ci_time).parse().map_err(|_| Error::Parse {
            line,
            message: format!("time `{}` is not a number", field(ci_time)),
        })?;
        if !time.is_finite() {
            non_finite.push(line);
        }
        let subject = field(ci_subject);
        let variable = field(ci_variable);
        if subject.is_empty() || variable.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty subject or variable id".into(),
            });
        }
        rows.push(RawRow {
            line,
            subject: subject.to_string(),
            variable: variable.to_string(),
            time,
            value: field(ci_value).to_string(),
        });
    }

    let specs: Vec<VariableSpec> = match specs {
        Some(s) => s.to_vec(),
        None => infer_specs(&rows),
    };
    let by_id: BTreeMap<&str, &VariableSpec> = specs.iter().map(|s| (s.id.as_str(), s)).collect();

    let mut observations = Vec::with_capacity(rows.len());
    for row in rows {
        let spec = by_id.get(row.variable.as_str()).ok_or_else(|| Error::Parse {
            line: row.line,
            message: format!("unknown variable `{}`", row.variable),
        })?;
        let value = match spec.kind {
            VariableKind::Continuous => {
                let x: f64 = row.value.parse().map_err(|_| Error::Parse {
                    line: row.line,
                    message: format!(
                        "value `{}` of continuous variable `{}` is not a number",
                        row.value, row.variable
                    ),
                })?;
                if !x.is_finite() {
                    non_finite.push(row.line);
                }
                Value::Continuous(x)
            }
            VariableKind::Discrete => {
                if spec.class_index(&row.value).is_none() {
                    return Err(Error::Parse {
                        line: row.line,
                        message: format!("`{}` is not a declared class of `{}`", row.value, row.variable),
                    });
                }
                Value::Discrete(row.value)
            }
        };
        observations.push(Observation {
            subject: row.subject,
            variable: row.variable,
            time: row.time,
            value,
        });
    }
    if !non_finite.is_empty() {
        non_finite.sort_unstable();
        non_finite.dedup();
        return Err(Error::NonFinite(non_finite));
    }
    LongDataset::from_observations(specs, observations)
}

fn infer_specs(rows: &[RawRow]) -> Vec<VariableSpec> {
    let mut labels: BTreeMap<&str, (bool, BTreeSet<&str>)> = BTreeMap::new();
    for r in rows {
        let e = labels.entry(r.variable.as_str()).or_insert((true, BTreeSet::new()));
        e.0 &= r.value.parse::<f64>().is_ok();
        e.1.insert(r.value.as_str());
    }
    labels
        .into_iter()
        .map(|(id, (numeric, classes))| {
            if numeric {
                log::info!("inferred `{id}` as continuous");
                VariableSpec::continuous(id)
            } else {
                log::info!("inferred `{id}` as discrete with {} classes", classes.len());
                VariableSpec::discrete(id, classes)
            }
        })
        .collect()
}

pub fn read_long_table(
    path: impl AsRef<Path>,
    options: &TableOptions,
    specs: Option<&[VariableSpec]>,
) -> Result<LongDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_long_table(std::io::BufReader::new(file), options, specs)
}

/// Writes every observation as `subject_id,variable_id,time,value`, ordered
/// by variable, subject and time. Reals use shortest round-trip formatting.
pub fn write_long_table(dataset: &LongDataset, sink: impl Write, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(sink);
    let schema = ColumnSchema::default();
    w.write_record([&schema.subject, &schema.variable, &schema.time, &schema.value])?;
    for obs in dataset.observations() {
        let value = match obs.value {
            Value::Continuous(x) => x.to_string(),
            Value::Discrete(label) => label,
        };
        w.write_record([obs.subject, obs.variable, obs.time.to_string(), value])?;
    }
    w.flush().map_err(|e| Error::io("<long table>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPresence {
    pub label: String,
    pub in_original: bool,
    pub in_synthetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Original,
    Synthetic,
}

/// Original and synthetic datasets restricted to their shared variables,
/// with discrete class sets unioned and both sides indexed against it.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub original: LongDataset,
    pub synthetic: LongDataset,
    pub unified_specs: BTreeMap<String, VariableSpec>,
    pub class_presence: BTreeMap<String, Vec<ClassPresence>>,
    /// Variables present on one side only, excluded from paired metrics.
    pub excluded: Vec<(String, Side)>,
}

impl DatasetPair {
    /// Pairs a dataset with itself (reference baselines, self-comparison).
    pub fn self_pair(dataset: &LongDataset) -> Self {
        let unified_specs = dataset.specs().map(|s| (s.id.clone(), s.clone())).collect();
        let class_presence = dataset
            .specs()
            .filter(|s| s.kind == VariableKind::Discrete)
            .map(|s| (s.id.clone(), presence(&s.classes, &s.classes, &s.classes)))
            .collect();
        Self {
            original: dataset.clone(),
            synthetic: dataset.clone(),
            unified_specs,
            class_presence,
            excluded: Vec::new(),
        }
    }
}

fn presence(unified: &[String], original: &[String], synthetic: &[String]) -> Vec<ClassPresence> {
    unified
        .iter()
        .map(|c| ClassPresence {
            label: c.clone(),
            in_original: original.contains(c),
            in_synthetic: synthetic.contains(c),
        })
        .collect()
}

/// Labels of classes that actually occur in a variable's data.
fn observed_classes(dataset: &LongDataset, id: &str) -> Vec<String> {
    let data = dataset.variable(id).expect("variable exists");
    let mut seen = vec![false; data.spec.classes.len()];
    for s in &data.series {
        for &c in s.discrete().unwrap_or(&[]) {
            seen[c] = true;
        }
    }
    data.spec
        .classes
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(c, _)| c.clone())
        .collect()
}

/// Matches variables by id and unions discrete class sets: original classes
/// in declared order, then synthetic-only classes in their declared order.
/// Presence flags record which side actually observed each class.
pub fn pair_datasets(original: LongDataset, synthetic: LongDataset) -> Result<DatasetPair> {
    let orig_ids: BTreeSet<String> = original.variable_ids().map(str::to_string).collect();
    let synth_ids: BTreeSet<String> = synthetic.variable_ids().map(str::to_string).collect();
    let mut excluded = Vec::new();
    excluded.extend(orig_ids.difference(&synth_ids).map(|v| (v.clone(), Side::Original)));
    excluded.extend(synth_ids.difference(&orig_ids).map(|v| (v.clone(), Side::Synthetic)));
    for (id, side) in &excluded {
        log::warn!("variable `{id}` only present in the {side:?} data; excluded from comparison");
    }

    let mut unified_specs = BTreeMap::new();
    let mut class_presence = BTreeMap::new();
    for id in orig_ids.intersection(&synth_ids) {
        let (a, b) = (original.spec(id)?, synthetic.spec(id)?);
        if a.kind != b.kind {
            return Err(Error::Validation(format!(
                "variable `{id}` is {} in the original data but {} in the synthetic data",
                a.kind.as_str(),
                b.kind.as_str()
            )));
        }
        if a.grid_step != b.grid_step {
            log::warn!(
                "variable `{id}`: grid steps differ ({} vs {}); using the original's",
                a.grid_step,
                b.grid_step
            );
        }
        let mut unified = a.clone();
        if a.kind == VariableKind::Discrete {
            for c in &b.classes {
                if !unified.classes.contains(c) {
                    unified.classes.push(c.clone());
                }
            }
            let presence = presence(
                &unified.classes,
                &observed_classes(&original, id),
                &observed_classes(&synthetic, id),
            );
            for p in &presence {
                if !p.in_synthetic && p.in_original {
                    log::info!("`{id}`: class `{}` absent from the synthetic data", p.label);
                } else if p.in_synthetic && !p.in_original {
                    log::info!("`{id}`: class `{}` only appears in the synthetic data", p.label);
                }
            }
            class_presence.insert(id.clone(), presence);
        }
        unified_specs.insert(id.clone(), unified);
    }

    let align = |mut ds: LongDataset| {
        ds.retain_variables(|id| unified_specs.contains_key(id));
        for data in ds.variables_mut() {
            let unified = &unified_specs[&data.spec.id];
            if data.spec.kind == VariableKind::Discrete {
                let map: Vec<usize> = data
                    .spec
                    .classes
                    .iter()
                    .map(|c| unified.class_index(c).expect("unified is a superset"))
                    .collect();
                for s in &mut data.series {
                    if let SeriesValues::Discrete(v) = &mut s.values {
                        for c in v.iter_mut() {
                            *c = map[*c];
                        }
                    }
                }
            }
            data.spec = unified.clone();
        }
        ds
    };
    let original = align(original);
    let synthetic = align(synthetic);
    Ok(DatasetPair {
        original,
        synthetic,
        unified_specs,
        class_presence,
        excluded,
    })
}

/// Random disjoint halves of the subject roster; the first half gets the
/// extra subject when the count is odd.
pub fn split_reference(original: &LongDataset, seed: u64) -> Result<(LongDataset, LongDataset)> {
    let n = original.n_subjects();
    if n < 2 {
        return Err(Error::Validation(format!(
            "a reference split needs at least two subjects, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = order.split_at(n.div_ceil(2));
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((original.select_subjects(&a), original.select_subjects(&b)))
}

/// Reads a `subject_id,stratum` table.
pub fn parse_strata(source: impl Read, delimiter: u8) -> Result<StratumAssignment> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("strata file is missing column `{name}`"),
        })
    };
    let (si, ki) = (find("subject_id")?, find("stratum")?);
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        pairs.push((
            record.get(si).unwrap_or("").to_string(),
            record.get(ki).unwrap_or("").to_string(),
        ));
    }
    StratumAssignment::from_pairs(pairs)
}

pub fn read_strata(path: impl AsRef<Path>, delimiter: u8) -> Result<StratumAssignment> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_strata(file, delimiter)
}
