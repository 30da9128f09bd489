//! Kernel-smoothed mean, quantile and class profiles on the common grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_level, ecdf_in_order, Bandwidth, TimeGroups};
use crate::model::{build_measurement_matrix, dropout_points, ContinuousPoints, LongDataset, TimeGrid, VariableData};

/// Grid points whose effective sample size falls below this are flagged as
/// low support.
pub const LOW_SUPPORT_ESS: f64 = 5.0;

pub const DEFAULT_QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMetric {
    Mean,
    Quantile,
    Class,
    Variance,
    Density,
    AtRisk,
}

impl ProfileMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileMetric::Mean => "mean",
            ProfileMetric::Quantile => "quantile",
            ProfileMetric::Class => "class",
            ProfileMetric::Variance => "variance",
            ProfileMetric::Density => "density",
            ProfileMetric::AtRisk => "at_risk",
        }
    }
}

/// A grid-indexed series; `values[t]` holds one entry per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSeries {
    pub metric: ProfileMetric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub grid: Vec<f64>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Effective sample size `1 / sum(w^2)` per grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess: Option<Vec<f64>>,
}

impl ProfileSeries {
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }

    pub fn column_named(&self, name: &str) -> Option<Vec<f64>> {
        self.columns.iter().position(|c| c == name).map(|k| self.column(k))
    }

    pub fn low_support_points(&self) -> Vec<usize> {
        self.ess
            .as_ref()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .filter(|(_, &v)| v < LOW_SUPPORT_ESS)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Largest absolute pointwise difference to another series on the same grid.
    pub fn max_abs_difference(&self, other: &ProfileSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Sorted, distinct quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(mut levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("at least one quantile level is required".into()));
        }
        for &q in &levels {
            check_level(q)?;
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self(levels))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.0.iter().map(|q| format!("q{q}")).collect()
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self(DEFAULT_QUANTILE_LEVELS.to_vec())
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(q: QuantileLevels) -> Vec<f64> {
        q.0
    }
}

/// Shared machinery for smoothing one continuous variable of one dataset.
pub(crate) struct ContinuousSmoother {
    pub points: ContinuousPoints,
    groups: TimeGroups,
    group_sum: Vec<f64>,
    group_mean: Vec<f64>,
    /// Sum of squared deviations from the group mean.
    group_m2: Vec<f64>,
    value_order: Vec<usize>,
    h: Bandwidth,
}

/// Mean, variance and effective sample size at one target time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
}

impl ContinuousSmoother {
    pub fn new(data: &VariableData, h: Bandwidth) -> Result<Self> {
        let points = data.continuous_points()?;
        if points.times.is_empty() {
            return Err(Error::NoMeasurements(data.spec.id.clone()));
        }
        let groups = TimeGroups::new(&points.times);
        let g = groups.times.len();
        let mut group_sum = vec![0.0; g];
        for (k, &x) in points.values.iter().enumerate() {
            group_sum[groups.group_of[k]] += x;
        }
        let group_mean: Vec<f64> = group_sum.iter().zip(&groups.counts).map(|(s, c)| s / c).collect();
        let mut group_m2 = vec![0.0; g];
        for (k, &x) in points.values.iter().enumerate() {
            let gi = groups.group_of[k];
            group_m2[gi] += (x - group_mean[gi]).powi(2);
        }
        let mut value_order: Vec<usize> = (0..points.values.len()).collect();
        value_order.sort_by(|&a, &b| points.values[a].total_cmp(&points.values[b]));
        Ok(Self {
            points,
            groups,
            group_sum,
            group_mean,
            group_m2,
            value_order,
            h,
        })
    }

    pub fn moments_at(&self, t: f64, buf: &mut Vec<f64>) -> Moments {
        self.groups.weights_at(t, self.h, buf);
        let mean: f64 = buf.iter().zip(&self.group_sum).map(|(w, s)| w * s).sum();
        let variance: f64 = buf
            .iter()
            .zip(&self.group_m2)
            .zip(self.group_mean.iter().zip(&self.groups.counts))
            .map(|((w, m2), (m, c))| w * (m2 + c * (m - mean) * (m - mean)))
            .sum();
        Moments {
            mean,
            variance,
            ess: self.groups.ess(buf),
        }
    }

    pub fn mean_at(&self, t: f64, buf: &mut Vec<f64>) -> f64 {
        self.groups.weights_at(t, self.h, buf);
        buf.iter().zip(&self.group_sum).map(|(w, s)| w * s).sum()
    }

    /// Quantiles at `t` for each level (levels sorted ascending).
    pub fn quantiles_at(&self, t: f64, levels: &[f64], buf: &mut Vec<f64>) -> Vec<f64> {
        self.groups.weights_at(t, self.h, buf);
        let group_of = &self.groups.group_of;
        let ecdf = ecdf_in_order(&self.points.values, &self.value_order, |k| buf[group_of[k]]);
        levels
            .iter()
            .map(|&q| ecdf.quantile(q).expect("levels validated, ecdf non-empty"))
            .collect()
    }

    pub fn quantile_rows(&self, grid: &TimeGrid, levels: &QuantileLevels) -> Vec<Vec<f64>> {
        let mut buf = Vec::new();
        grid.points
            .iter()
            .map(|&t| self.quantiles_at(t, levels.as_slice(), &mut buf))
            .collect()
    }
}

fn profile(
    metric: ProfileMetric,
    h: Option<Bandwidth>,
    grid: &TimeGrid,
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
    ess: Option<Vec<f64>>,
) -> ProfileSeries {
    ProfileSeries {
        metric,
        bandwidth: h.map(Bandwidth::value),
        grid: grid.points.clone(),
        columns,
        values,
        ess,
    }
}

/// Kernel-smoothed mean at every grid point.
pub fn mean_profile(dataset: &LongDataset, variable: &str, grid: &TimeGrid, h: Bandwidth) -> Result<ProfileSeries> {
    let smoother = ContinuousSmoother::new(dataset.variable(variable)?, h)?;
    let mut buf = Vec::new();
    let (values, ess): (Vec<_>, Vec<_>) = grid
        .points
        .iter()
        .map(|&t| {
            let m = smoother.moments_at(t, &mut buf);
            (vec![m.mean], m.ess)
        })
        .unzip();
    Ok(profile(
        ProfileMetric::Mean,
        Some(h),
        grid,
        vec!["mean".into()],
        values,
        Some(ess),
    ))
}

/// Kernel-smoothed quantile curves, one column per level.
pub fn quantile_profile(
    dataset: &LongDataset,
    variable: &str,
    grid: &TimeGrid,
    h: Bandwidth,
    levels: &QuantileLevels,
) -> Result<ProfileSeries> {
    let smoother = ContinuousSmoother::new(dataset.variable(variable)?, h)?;
    let values = smoother.quantile_rows(grid, levels);
    Ok(profile(
        ProfileMetric::Quantile,
        Some(h),
        grid,
        levels.labels(),
        values,
        None,
    ))
}

/// Kernel-smoothed class proportions over the variable's declared classes.
/// Classes never observed in this dataset get identically zero curves.
pub fn class_profile(dataset: &LongDataset, variable: &str, grid: &TimeGrid, h: Bandwidth) -> Result<ProfileSeries> {
    let data = dataset.variable(variable)?;
    let points = data.discrete_points()?;
    if points.times.is_empty() {
        return Err(Error::NoMeasurements(variable.to_string()));
    }
    let n_classes = data.spec.classes.len();
    let groups = TimeGroups::new(&points.times);
    let mut class_counts = vec![vec![0.0; n_classes]; groups.times.len()];
    for (k, &c) in points.classes.iter().enumerate() {
        class_counts[groups.group_of[k]][c] += 1.0;
    }
    let mut buf = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    let mut ess = Vec::with_capacity(grid.len());
    for &t in &grid.points {
        groups.weights_at(t, h, &mut buf);
        let mut p = vec![0.0; n_classes];
        for (w, counts) in buf.iter().zip(&class_counts) {
            for (pc, n) in p.iter_mut().zip(counts) {
                *pc += w * n;
            }
        }
        values.push(p);
        ess.push(groups.ess(&buf));
    }
    Ok(profile(
        ProfileMetric::Class,
        Some(h),
        grid,
        data.spec.classes.clone(),
        values,
        Some(ess),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierSide {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub subject: String,
    pub time: f64,
    pub value: f64,
    pub side: OutlierSide,
}

/// Raw observations strictly outside the `[q_low, q_high]` quantile band at
/// their nearest grid point.
pub fn outlier_overlay(
    dataset: &LongDataset,
    variable: &str,
    grid: &TimeGrid,
    h: Bandwidth,
    q_low: f64,
    q_high: f64,
) -> Result<Vec<Outlier>> {
    if q_low >= q_high {
        return Err(Error::Config(format!(
            "outlier band needs q_low < q_high, got {q_low} and {q_high}"
        )));
    }
    let levels = QuantileLevels::new(vec![q_low, q_high])?;
    let smoother = ContinuousSmoother::new(dataset.variable(variable)?, h)?;
    let bands = smoother.quantile_rows(grid, &levels);
    let points = &smoother.points;
    let mut out = Vec::new();
    for k in 0..points.times.len() {
        let band = &bands[grid.nearest_index(points.times[k])];
        let x = points.values[k];
        let side = if x < band[0] {
            OutlierSide::Below
        } else if x > band[1] {
            OutlierSide::Above
        } else {
            continue;
        };
        out.push(Outlier {
            subject: dataset.subjects()[points.subjects[k]].clone(),
            time: points.times[k],
            value: x,
            side,
        });
    }
    Ok(out)
}

/// Share of subjects under follow-up at each grid point: first observation
/// at or before `t` and dropout point at or after `t`, both snapped to the
/// grid. The denominator is the number of subjects with any observation.
pub fn subjects_at_risk(dataset: &LongDataset, variable: &str, grid: &TimeGrid) -> Result<ProfileSeries> {
    let data = dataset.variable(variable)?;
    let dropout = dropout_points(&build_measurement_matrix(dataset, variable, grid)?);
    let mut diff = vec![0i64; grid.len() + 1];
    let mut observed = 0usize;
    for (s, d) in data.series.iter().zip(&dropout.points) {
        if let (Some(&first), Some(last)) = (s.times.first(), d) {
            observed += 1;
            diff[grid.nearest_index(first)] += 1;
            diff[last + 1] -= 1;
        }
    }
    if observed == 0 {
        return Err(Error::NoMeasurements(variable.to_string()));
    }
    let mut running = 0i64;
    let values = (0..grid.len())
        .map(|t| {
            running += diff[t];
            vec![running as f64 / observed as f64]
        })
        .collect();
    Ok(profile(
        ProfileMetric::AtRisk,
        None,
        grid,
        vec!["at_risk".into()],
        values,
        None,
    ))
}
