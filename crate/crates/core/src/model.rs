//! Core data types: long-format datasets, the common evaluation grid, and
//! measurement indicator matrices with their dropout points.
//!
//! Everything here is immutable once built. Discrete values are stored as
//! indices into the owning [`VariableSpec`]'s class list, so two datasets
//! that went through pairing share one index space per variable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_STEP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Discrete,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Continuous => "continuous",
            VariableKind::Discrete => "discrete",
        }
    }
}

/// Declares a variable's kind, class set (discrete only) and grid step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub id: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default)]
    pub time_unit: String,
    pub grid_step: f64,
}

impl VariableSpec {
    pub fn continuous(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Continuous,
            classes: Vec::new(),
            time_unit: String::new(),
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn discrete<S: Into<String>>(id: impl Into<String>, classes: impl IntoIterator<Item = S>) -> Self {
        Self {
            id: id.into(),
            kind: VariableKind::Discrete,
            classes: classes.into_iter().map(Into::into).collect(),
            time_unit: String::new(),
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn with_grid_step(mut self, step: f64) -> Self {
        self.grid_step = step;
        self
    }

    pub fn with_time_unit(mut self, unit: impl Into<String>) -> Self {
        self.time_unit = unit.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step.is_finite() && self.grid_step > 0.0) {
            return Err(Error::Config(format!(
                "variable `{}`: grid step must be positive, got {}",
                self.id, self.grid_step
            )));
        }
        match self.kind {
            VariableKind::Continuous => {
                if !self.classes.is_empty() {
                    return Err(Error::Config(format!(
                        "variable `{}` is continuous but declares classes",
                        self.id
                    )));
                }
            }
            VariableKind::Discrete => {
                if self.classes.is_empty() {
                    return Err(Error::Config(format!(
                        "discrete variable `{}` needs at least one class",
                        self.id
                    )));
                }
                let unique: BTreeSet<&String> = self.classes.iter().collect();
                if unique.len() != self.classes.len() {
                    return Err(Error::Config(format!(
                        "discrete variable `{}` has duplicate class labels",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

/// A single measured value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Continuous(f64),
    Discrete(String),
}

/// One row of a long-format table.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub subject: String,
    pub variable: String,
    pub time: f64,
    pub value: Value,
}

impl Observation {
    pub fn continuous(subject: impl Into<String>, variable: impl Into<String>, time: f64, value: f64) -> Self {
        Self {
            subject: subject.into(),
            variable: variable.into(),
            time,
            value: Value::Continuous(value),
        }
    }

    pub fn discrete(
        subject: impl Into<String>,
        variable: impl Into<String>,
        time: f64,
        label: impl Into<String>,
    ) -> Self {
        Self {
            subject: subject.into(),
            variable: variable.into(),
            time,
            value: Value::Discrete(label.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesValues {
    Continuous(Vec<f64>),
    /// Indices into the variable's class list.
    Discrete(Vec<usize>),
}

/// Time-sorted measurements of one variable for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: SeriesValues,
}

impl Series {
    pub fn empty(kind: VariableKind) -> Self {
        let values = match kind {
            VariableKind::Continuous => SeriesValues::Continuous(Vec::new()),
            VariableKind::Discrete => SeriesValues::Discrete(Vec::new()),
        };
        Self {
            times: Vec::new(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn continuous(&self) -> Option<&[f64]> {
        match &self.values {
            SeriesValues::Continuous(v) => Some(v),
            SeriesValues::Discrete(_) => None,
        }
    }

    pub fn discrete(&self) -> Option<&[usize]> {
        match &self.values {
            SeriesValues::Discrete(v) => Some(v),
            SeriesValues::Continuous(_) => None,
        }
    }

    /// Stable sort by time; equal times keep their input order.
    fn sort_by_time(&mut self) {
        if self.times.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let mut order: Vec<usize> = (0..self.times.len()).collect();
        order.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        self.times = order.iter().map(|&k| self.times[k]).collect();
        self.values = match &self.values {
            SeriesValues::Continuous(v) => SeriesValues::Continuous(order.iter().map(|&k| v[k]).collect()),
            SeriesValues::Discrete(v) => SeriesValues::Discrete(order.iter().map(|&k| v[k]).collect()),
        };
    }

    fn push(&mut self, time: f64, value: SeriesValue) {
        self.times.push(time);
        match (&mut self.values, value) {
            (SeriesValues::Continuous(v), SeriesValue::Continuous(x)) => v.push(x),
            (SeriesValues::Discrete(v), SeriesValue::Discrete(c)) => v.push(c),
            _ => unreachable!("value kind checked against spec before push"),
        }
    }
}

enum SeriesValue {
    Continuous(f64),
    Discrete(usize),
}

/// All series of one variable, indexed by the dataset's subject roster.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableData {
    pub spec: VariableSpec,
    pub series: Vec<Series>,
}

impl VariableData {
    pub fn observation_count(&self) -> usize {
        self.series.iter().map(Series::len).sum()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.series.iter().flat_map(|s| s.times.iter().copied())
    }

    pub fn require_kind(&self, kind: VariableKind) -> Result<()> {
        if self.spec.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                variable: self.spec.id.clone(),
                expected: kind.as_str(),
                actual: self.spec.kind.as_str(),
            })
        }
    }

    /// Flattened `(subject index, time, value)` for a continuous variable.
    pub fn continuous_points(&self) -> Result<ContinuousPoints> {
        self.require_kind(VariableKind::Continuous)?;
        let mut points = ContinuousPoints::default();
        for (i, s) in self.series.iter().enumerate() {
            let values = s.continuous().expect("kind checked");
            for (&t, &x) in s.times.iter().zip(values) {
                points.subjects.push(i);
                points.times.push(t);
                points.values.push(x);
            }
        }
        Ok(points)
    }

    /// Flattened `(subject index, time, class index)` for a discrete variable.
    pub fn discrete_points(&self) -> Result<DiscretePoints> {
        self.require_kind(VariableKind::Discrete)?;
        let mut points = DiscretePoints::default();
        for (i, s) in self.series.iter().enumerate() {
            let values = s.discrete().expect("kind checked");
            for (&t, &c) in s.times.iter().zip(values) {
                points.subjects.push(i);
                points.times.push(t);
                points.classes.push(c);
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuousPoints {
    pub subjects: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscretePoints {
    pub subjects: Vec<usize>,
    pub times: Vec<f64>,
    pub classes: Vec<usize>,
}

/// A long-format dataset: per variable, one time-sorted series per subject.
///
/// The subject roster is sorted, so row order never depends on input order.
#[derive(Debug, Clone, PartialEq)]
pub struct LongDataset {
    subjects: Vec<String>,
    variables: BTreeMap<String, VariableData>,
}

impl LongDataset {
    /// Validates observations against `specs` and groups them into series.
    pub fn from_observations(
        specs: impl IntoIterator<Item = VariableSpec>,
        observations: impl IntoIterator<Item = Observation>,
    ) -> Result<Self> {
        let mut spec_map = BTreeMap::new();
        for spec in specs {
            spec.validate()?;
            if spec_map.insert(spec.id.clone(), spec).is_some() {
                return Err(Error::Config("duplicate variable spec".into()));
            }
        }
        let observations: Vec<Observation> = observations.into_iter().collect();
        let roster: BTreeSet<&str> = observations.iter().map(|o| o.subject.as_str()).collect();
        let subjects: Vec<String> = roster.iter().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, usize> = roster.iter().enumerate().map(|(i, s)| (*s, i)).collect();

        let mut variables: BTreeMap<String, VariableData> = spec_map
            .into_iter()
            .map(|(id, spec)| {
                let series = vec![Series::empty(spec.kind); subjects.len()];
                (id, VariableData { spec, series })
            })
            .collect();

        for obs in &observations {
            let data = variables
                .get_mut(&obs.variable)
                .ok_or_else(|| Error::UnknownVariable(obs.variable.clone()))?;
            if !obs.time.is_finite() {
                return Err(Error::Validation(format!(
                    "subject `{}`, variable `{}`: time {} is not finite",
                    obs.subject, obs.variable, obs.time
                )));
            }
            let value = match (&obs.value, data.spec.kind) {
                (Value::Continuous(x), VariableKind::Continuous) => {
                    if !x.is_finite() {
                        return Err(Error::Validation(format!(
                            "subject `{}`, variable `{}`: value {x} is not finite",
                            obs.subject, obs.variable
                        )));
                    }
                    SeriesValue::Continuous(*x)
                }
                (Value::Discrete(label), VariableKind::Discrete) => {
                    let c = data.spec.class_index(label).ok_or_else(|| {
                        Error::Validation(format!("variable `{}`: class `{label}` is not declared", obs.variable))
                    })?;
                    SeriesValue::Discrete(c)
                }
                (_, kind) => {
                    return Err(Error::Validation(format!(
                        "variable `{}` is {} but subject `{}` has a value of the other kind",
                        obs.variable,
                        kind.as_str(),
                        obs.subject
                    )))
                }
            };
            data.series[index[obs.subject.as_str()]].push(obs.time, value);
        }
        for data in variables.values_mut() {
            for s in &mut data.series {
                s.sort_by_time();
            }
        }
        Ok(Self { subjects, variables })
    }

    /// Assembles a dataset from pre-built series. Series must be time-sorted
    /// and aligned with `subjects`.
    pub fn from_parts(subjects: Vec<String>, variables: Vec<VariableData>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for data in variables {
            data.spec.validate()?;
            if data.series.len() != subjects.len() {
                return Err(Error::Validation(format!(
                    "variable `{}` has {} series for {} subjects",
                    data.spec.id,
                    data.series.len(),
                    subjects.len()
                )));
            }
            for s in &data.series {
                check_series(&data.spec, s)?;
            }
            map.insert(data.spec.id.clone(), data);
        }
        let mut order: Vec<usize> = (0..subjects.len()).collect();
        order.sort_by(|&a, &b| subjects[a].cmp(&subjects[b]));
        if order.windows(2).any(|w| subjects[w[0]] == subjects[w[1]]) {
            return Err(Error::Validation("duplicate subject ids".into()));
        }
        let dataset = Self {
            subjects,
            variables: map,
        };
        Ok(dataset.select_subjects(&order))
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn variable_ids(&self) -> impl Iterator<Item = &str> {
        self.variables.keys().map(String::as_str)
    }

    pub fn variables(&self) -> impl Iterator<Item = &VariableData> {
        self.variables.values()
    }

    pub fn variable(&self, id: &str) -> Result<&VariableData> {
        self.variables
            .get(id)
            .ok_or_else(|| Error::UnknownVariable(id.to_string()))
    }

    pub fn spec(&self, id: &str) -> Result<&VariableSpec> {
        self.variable(id).map(|d| &d.spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &VariableSpec> {
        self.variables.values().map(|d| &d.spec)
    }

    pub fn observation_count(&self) -> usize {
        self.variables.values().map(VariableData::observation_count).sum()
    }

    /// New dataset restricted to the given roster positions (in that order).
    pub fn select_subjects(&self, indices: &[usize]) -> Self {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        let variables = self
            .variables
            .iter()
            .map(|(id, data)| {
                let series = indices.iter().map(|&i| data.series[i].clone()).collect();
                (
                    id.clone(),
                    VariableData {
                        spec: data.spec.clone(),
                        series,
                    },
                )
            })
            .collect();
        Self { subjects, variables }
    }

    /// Keeps only the named variables.
    pub fn retain_variables(&mut self, keep: impl Fn(&str) -> bool) {
        self.variables.retain(|id, _| keep(id));
    }

    pub(crate) fn variables_mut(&mut self) -> impl Iterator<Item = &mut VariableData> {
        self.variables.values_mut()
    }

    /// Every observation as an owned row, ordered by variable, subject, time.
    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.variables.values().flat_map(move |data| {
            data.series.iter().enumerate().flat_map(move |(i, s)| {
                (0..s.len()).map(move |k| Observation {
                    subject: self.subjects[i].clone(),
                    variable: data.spec.id.clone(),
                    time: s.times[k],
                    value: match &s.values {
                        SeriesValues::Continuous(v) => Value::Continuous(v[k]),
                        SeriesValues::Discrete(v) => Value::Discrete(data.spec.classes[v[k]].clone()),
                    },
                })
            })
        })
    }
}

fn check_series(spec: &VariableSpec, s: &Series) -> Result<()> {
    let n_values = match &s.values {
        SeriesValues::Continuous(v) => {
            if spec.kind != VariableKind::Continuous || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "variable `{}`: bad continuous series",
                    spec.id
                )));
            }
            v.len()
        }
        SeriesValues::Discrete(v) => {
            if spec.kind != VariableKind::Discrete || v.iter().any(|&c| c >= spec.classes.len()) {
                return Err(Error::Validation(format!(
                    "variable `{}`: bad discrete series",
                    spec.id
                )));
            }
            v.len()
        }
    };
    if n_values != s.times.len() || s.times.iter().any(|t| !t.is_finite()) || s.times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation(format!(
            "variable `{}`: series times must be finite, sorted and match the values",
            spec.id
        )));
    }
    Ok(())
}

/// Regular evaluation grid `t_min + m * step`, `m = 0..=floor((t_max - t_min) / step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
    pub points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        if !(t_min.is_finite() && t_max.is_finite()) || t_max < t_min {
            return Err(Error::Config(format!("invalid grid range [{t_min}, {t_max}]")));
        }
        // The epsilon absorbs representation error in spans like 0.3 / 0.1.
        let last = ((t_max - t_min) / step + 1e-9).floor() as usize;
        let points = (0..=last).map(|m| t_min + m as f64 * step).collect();
        Ok(Self {
            t_min,
            t_max,
            step,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest grid point; exact midpoints go to the earlier point. Times
    /// outside the grid clamp to the first or last point.
    pub fn nearest_index(&self, t: f64) -> usize {
        let m = ((t - self.t_min) / self.step - 0.5).ceil();
        if m <= 0.0 {
            0
        } else {
            (m as usize).min(self.points.len() - 1)
        }
    }
}

/// Builds the common grid over the union of original and synthetic times.
pub fn build_time_grid(
    original_times: impl IntoIterator<Item = f64>,
    synthetic_times: impl IntoIterator<Item = f64>,
    step: f64,
) -> Result<TimeGrid> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    let (lo, hi) = original_times
        .into_iter()
        .chain(synthetic_times)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)));
    if lo > hi {
        return Err(Error::NoMeasurements("<grid>".into()));
    }
    TimeGrid::new(lo, hi, step)
}

/// Binary subject x grid-point matrix of observed measurements, stored as
/// packed bit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    subjects: Vec<String>,
    grid: TimeGrid,
    words: usize,
    bits: Vec<u64>,
}

impl MeasurementMatrix {
    pub fn from_rows(subjects: Vec<String>, grid: TimeGrid, rows: &[Vec<bool>]) -> Result<Self> {
        if rows.len() != subjects.len() || rows.iter().any(|r| r.len() != grid.len()) {
            return Err(Error::Validation(
                "measurement matrix rows must match the roster and the grid".into(),
            ));
        }
        let mut m = Self::zeros(subjects, grid);
        for (i, row) in rows.iter().enumerate() {
            for (t, &b) in row.iter().enumerate() {
                if b {
                    m.set(i, t);
                }
            }
        }
        Ok(m)
    }

    fn zeros(subjects: Vec<String>, grid: TimeGrid) -> Self {
        let words = grid.len().div_ceil(64).max(1);
        let bits = vec![0; words * subjects.len()];
        Self {
            subjects,
            grid,
            words,
            bits,
        }
    }

    fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.words + col / 64] |= 1 << (col % 64);
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_rows(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words..(row + 1) * self.words]
    }

    pub fn row(&self, row: usize) -> Vec<bool> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.n_cols()];
        for i in 0..self.n_rows() {
            for (c, s) in sums.iter_mut().enumerate() {
                *s += u64::from(self.get(i, c));
            }
        }
        sums
    }

    /// Number of differing bits between two rows of equal-width matrices.
    pub fn row_distance(&self, row: usize, other: &MeasurementMatrix, other_row: usize) -> u32 {
        self.row_words(row)
            .iter()
            .zip(other.row_words(other_row))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(rows.len() * self.words);
        for &r in rows {
            bits.extend_from_slice(self.row_words(r));
        }
        Self {
            subjects: rows.iter().map(|&r| self.subjects[r].clone()).collect(),
            grid: self.grid.clone(),
            words: self.words,
            bits,
        }
    }
}

/// Indicator matrix of one variable on `grid`, one row per roster subject.
/// Observations snap to their nearest grid point.
pub fn build_measurement_matrix(dataset: &LongDataset, variable: &str, grid: &TimeGrid) -> Result<MeasurementMatrix> {
    let data = dataset.variable(variable)?;
    let mut m = MeasurementMatrix::zeros(dataset.subjects().to_vec(), grid.clone());
    for (i, s) in data.series.iter().enumerate() {
        for &t in &s.times {
            m.set(i, grid.nearest_index(t));
        }
    }
    Ok(m)
}

/// Per-subject dropout point as a grid index; `None` for subjects without
/// any measurement of the variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutVector {
    pub grid_len: usize,
    pub points: Vec<Option<usize>>,
}

impl DropoutVector {
    pub fn observed(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().flatten().copied()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            grid_len: self.grid_len,
            points: rows.iter().map(|&r| self.points[r]).collect(),
        }
    }
}

pub fn dropout_points(matrix: &MeasurementMatrix) -> DropoutVector {
    let points = (0..matrix.n_rows())
        .map(|i| (0..matrix.n_cols()).rev().find(|&c| matrix.get(i, c)))
        .collect();
    DropoutVector {
        grid_len: matrix.n_cols(),
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, step: f64) -> TimeGrid {
        TimeGrid::new(lo, hi, step).unwrap()
    }

    #[test]
    fn grid_matches_observed_times() {
        let g = build_time_grid([0.0, 5.0, 10.0], [0.0, 5.0, 10.0], 5.0).unwrap();
        assert_eq!(g.points, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn grid_spans_union_including_negative_times() {
        let g = build_time_grid([0.0, 48.0], [-1.0, 47.0], 1.0).unwrap();
        assert_eq!((g.t_min, g.t_max, g.len()), (-1.0, 48.0, 50));
    }

    #[test]
    fn grid_floor_rule() {
        let g = build_time_grid([0.0, 7.0], [0.0, 7.0], 3.0).unwrap();
        assert_eq!(g.points, vec![0.0, 3.0, 6.0]);
        assert!(*g.points.last().unwrap() <= g.t_max && g.t_max < g.points.last().unwrap() + g.step);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            build_time_grid(std::iter::empty(), std::iter::empty(), 1.0),
            Err(Error::NoMeasurements(_))
        ));
        assert!(matches!(build_time_grid([0.0], [1.0], 0.0), Err(Error::Config(_))));
        assert!(matches!(build_time_grid([0.0], [1.0], -2.0), Err(Error::Config(_))));
    }

    #[test]
    fn snapping_agrees_with_brute_force_distance() {
        let g = grid(0.0, 10.0, 1.0);
        assert_eq!(g.nearest_index(1.4), 1);
        for k in 0..=1000 {
            let t = -0.5 + k as f64 * 0.011;
            let idx = g.nearest_index(t);
            let best = g.points.iter().map(|p| (p - t).abs()).fold(f64::INFINITY, f64::min);
            assert!(((g.points[idx] - t).abs() - best).abs() < 1e-12, "t = {t}");
        }
        // Ties go to the earlier point.
        assert_eq!(g.nearest_index(2.5), 2);
        assert_eq!(g.nearest_index(-3.0), 0);
        assert_eq!(g.nearest_index(99.0), 10);
    }

    fn one_var(obs: Vec<Observation>) -> LongDataset {
        LongDataset::from_observations([VariableSpec::continuous("x")], obs).unwrap()
    }

    #[test]
    fn matrix_rows_and_dropout() {
        let ds = LongDataset::from_observations(
            [VariableSpec::continuous("x"), VariableSpec::continuous("y")],
            vec![
                Observation::continuous("A", "x", 0.0, 1.0),
                Observation::continuous("A", "x", 2.0, 1.0),
                Observation::continuous("B", "y", 1.0, 1.0),
            ],
        )
        .unwrap();
        let g = grid(0.0, 2.0, 1.0);
        let m = build_measurement_matrix(&ds, "x", &g).unwrap();
        assert_eq!(m.row(0), vec![true, false, true]);
        assert_eq!(m.row(1), vec![false, false, false]);
        let d = dropout_points(&m);
        assert_eq!(d.points, vec![Some(2), None]);
    }

    #[test]
    fn dropout_is_last_set_bit() {
        let g = grid(0.0, 3.0, 1.0);
        let m = MeasurementMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            g,
            &[
                vec![true, true, false, false],
                vec![false, false, false, true],
                vec![false; 4],
            ],
        )
        .unwrap();
        let d = dropout_points(&m);
        assert_eq!(d.points, vec![Some(1), Some(3), None]);
        for (i, p) in d.points.iter().enumerate() {
            if let Some(p) = p {
                assert!(m.get(i, *p));
                assert!((p + 1..m.n_cols()).all(|c| !m.get(i, c)));
            }
        }
    }

    #[test]
    fn duplicates_keep_indicator_at_one() {
        let ds = one_var(vec![
            Observation::continuous("A", "x", 1.0, 1.0),
            Observation::continuous("A", "x", 1.2, 2.0),
        ]);
        let m = build_measurement_matrix(&ds, "x", &grid(0.0, 2.0, 1.0)).unwrap();
        assert_eq!(m.row(0), vec![false, true, false]);
        assert_eq!(ds.variable("x").unwrap().observation_count(), 2);
    }

    #[test]
    fn series_sorted_and_roster_stable() {
        let obs = vec![
            Observation::continuous("b", "x", 3.0, 3.0),
            Observation::continuous("a", "x", 2.0, 2.0),
            Observation::continuous("b", "x", 1.0, 1.0),
        ];
        let mut rev = obs.clone();
        rev.reverse();
        let d1 = one_var(obs);
        let d2 = one_var(rev);
        assert_eq!(d1, d2);
        assert_eq!(d1.subjects(), &["a".to_string(), "b".to_string()]);
        let s = &d1.variable("x").unwrap().series[1];
        assert_eq!(s.times, vec![1.0, 3.0]);
        assert_eq!(s.continuous().unwrap(), &[1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_observations() {
        let specs = || [VariableSpec::continuous("x"), VariableSpec::discrete("c", ["a", "b"])];
        let bad = [
            Observation::continuous("s", "x", f64::NAN, 1.0),
            Observation::continuous("s", "x", 0.0, f64::INFINITY),
            Observation::discrete("s", "c", 0.0, "zzz"),
            Observation::discrete("s", "x", 0.0, "a"),
        ];
        for o in bad {
            assert!(LongDataset::from_observations(specs(), [o]).is_err());
        }
        assert!(matches!(
            LongDataset::from_observations(specs(), [Observation::continuous("s", "q", 0.0, 1.0)]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(VariableSpec::discrete("c", Vec::<String>::new()).validate().is_err());
        assert!(VariableSpec::discrete("c", ["a", "a"]).validate().is_err());
        assert!(VariableSpec::continuous("x").with_grid_step(0.0).validate().is_err());
        assert!(VariableSpec::continuous("x").validate().is_ok());
    }
}
