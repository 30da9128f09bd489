//! Per-variable orchestration of every metric over a dataset pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::covariance::{
    decompose_variance, default_lags, rank_order_variability, transition_profile, variance_profile, variogram,
    RankVariabilityDistribution, TransitionProfile, VarianceDecomposition, VariogramSeries,
};
use crate::error::{Error, Result};
use crate::individual::{baseline_strata, sample_trajectories, StratumAssignment, TrajectoryPanel};
use crate::ingest::{ClassPresence, DatasetPair, Side};
use crate::kernel::Bandwidth;
use crate::marginal::{
    class_profile, mean_profile, outlier_overlay, quantile_profile, subjects_at_risk, Outlier, ProfileSeries,
};
use crate::measurement::{reference_protocol, subsample_protocol, MeasurementReport, ProtocolBlock};
use crate::model::{build_time_grid, LongDataset, TimeGrid, VariableKind};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paired<T> {
    pub original: T,
    pub synthetic: T,
}

impl<T> Paired<T> {
    fn compute(mut f: impl FnMut(&LongDataset) -> Result<T>, pair: &DatasetPair) -> Result<Self> {
        Ok(Self {
            original: f(&pair.original)?,
            synthetic: f(&pair.synthetic)?,
        })
    }
}

/// Everything computed at one bandwidth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothedMetrics {
    pub bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variogram_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Paired<ProfileSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<Paired<ProfileSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<Paired<ProfileSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variogram: Option<Paired<VariogramSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Paired<VarianceDecomposition>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_variability: Option<Paired<RankVariabilityDistribution>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Paired<TrajectoryPanel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outliers: Option<Paired<Vec<Outlier>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<Paired<ProfileSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Paired<TransitionProfile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable: String,
    pub kind: VariableKind,
    pub grid: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassPresence>>,
    pub smoothed: Vec<SmoothedMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_risk: Option<Paired<ProfileSeries>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementReport>,
}

/// One metric (or a whole variable, with `metric == "*"`) that could not be
/// computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub variable: String,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub variables: Vec<String>,
    /// Variables found on one side only.
    pub excluded: Vec<(String, Side)>,
}

impl Metadata {
    pub fn new(config: &RunConfig, variables: Vec<String>, excluded: Vec<(String, Side)>) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config: config.clone(),
            variables,
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metadata: Metadata,
    pub variables: Vec<VariableReport>,
    pub failures: Vec<Failure>,
}

impl ComparisonReport {
    pub fn variable(&self, id: &str) -> Option<&VariableReport> {
        self.variables.iter().find(|v| v.variable == id)
    }
}

/// Variables of `dataset` selected by `config`; an explicitly requested
/// variable that does not exist is an error.
pub fn selected_variables(config: &RunConfig, available: &[String]) -> Result<Vec<String>> {
    if let Some(missing) = config.vars.iter().find(|v| !available.contains(v)) {
        return Err(Error::UnknownVariable(missing.clone()));
    }
    Ok(available.iter().filter(|v| config.selects(v)).cloned().collect())
}

struct Recorder<'a> {
    variable: &'a str,
    failures: Vec<Failure>,
}

impl Recorder<'_> {
    fn keep<T>(&mut self, metric: &str, bandwidth: Option<f64>, r: Result<T>) -> Option<T> {
        r.map_err(|e| {
            log::warn!("`{}`: {metric} failed: {e}", self.variable);
            self.failures.push(Failure {
                variable: self.variable.to_string(),
                metric: metric.to_string(),
                bandwidth,
                message: e.to_string(),
            });
        })
        .ok()
    }
}

fn variable_grid(pair: &DatasetPair, variable: &str, config: &RunConfig) -> Result<TimeGrid> {
    let (a, b) = (pair.original.variable(variable)?, pair.synthetic.variable(variable)?);
    let step = config.grid_step_for(variable, a.spec.grid_step);
    build_time_grid(a.times(), b.times(), step).map_err(|e| match e {
        Error::NoMeasurements(_) => Error::NoMeasurements(variable.to_string()),
        other => other,
    })
}

fn evaluate_variable(
    pair: &DatasetPair,
    variable: &str,
    config: &RunConfig,
    strata: Option<&StratumAssignment>,
) -> (Option<VariableReport>, Vec<Failure>) {
    let mut rec = Recorder {
        variable,
        failures: Vec::new(),
    };
    let Some(grid) = rec.keep("*", None, variable_grid(pair, variable, config)) else {
        return (None, rec.failures);
    };
    let kind = pair.unified_specs[variable].kind;
    let mut smoothed = Vec::with_capacity(config.bandwidths.len());
    for &h in &config.bandwidths {
        let b = Some(h.value());
        let mut m = SmoothedMetrics {
            bandwidth: h.value(),
            ..Default::default()
        };
        match kind {
            VariableKind::Continuous => {
                let hv = config.variogram_bandwidth.unwrap_or(h);
                m.variogram_bandwidth = Some(hv.value());
                m.mean = rec.keep(
                    "mean",
                    b,
                    Paired::compute(|d| mean_profile(d, variable, &grid, h), pair),
                );
                m.quantile = rec.keep(
                    "quantile",
                    b,
                    Paired::compute(|d| quantile_profile(d, variable, &grid, h, &config.quantiles), pair),
                );
                m.variance = rec.keep(
                    "variance",
                    b,
                    Paired::compute(|d| variance_profile(d, variable, &grid, h), pair),
                );
                let lags = default_lags(&grid);
                m.variogram = rec.keep(
                    "variogram",
                    b,
                    Paired::compute(|d| variogram(d, variable, &lags, hv), pair),
                );
                if let (Some(v), Some(g)) = (&m.variance, &m.variogram) {
                    m.decomposition = rec.keep(
                        "decomposition",
                        b,
                        decompose_variance(&v.original, &g.original).and_then(|original| {
                            Ok(Paired {
                                original,
                                synthetic: decompose_variance(&v.synthetic, &g.synthetic)?,
                            })
                        }),
                    );
                }
                m.rank_variability = rec.keep(
                    "rank_variability",
                    b,
                    Paired::compute(
                        |d| rank_order_variability(d, variable, &grid, h, &config.quantiles),
                        pair,
                    ),
                );
                m.trajectories = rec.keep(
                    "trajectories",
                    b,
                    Paired::compute(
                        |d| {
                            let own;
                            let s = match strata {
                                Some(s) => s,
                                None => {
                                    own = baseline_strata(d, variable, &grid, h, &config.quantiles)?;
                                    &own
                                }
                            };
                            sample_trajectories(d, variable, s, config.per_stratum, config.seed)
                        },
                        pair,
                    ),
                );
                let [lo, hi] = config.outlier_band;
                m.outliers = rec.keep(
                    "outliers",
                    b,
                    Paired::compute(|d| outlier_overlay(d, variable, &grid, h, lo, hi), pair),
                );
            }
            VariableKind::Discrete => {
                m.class = rec.keep(
                    "class",
                    b,
                    Paired::compute(|d| class_profile(d, variable, &grid, h), pair),
                );
                m.transitions = rec.keep(
                    "transitions",
                    b,
                    Paired::compute(|d| transition_profile(d, variable, &grid, h, config.max_gap), pair),
                );
            }
        }
        smoothed.push(m);
    }
    let at_risk = rec.keep(
        "at_risk",
        None,
        Paired::compute(|d| subjects_at_risk(d, variable, &grid), pair),
    );
    let measurement = rec.keep(
        "measurement",
        None,
        subsample_protocol(pair, variable, &grid, &config.protocol()),
    );
    let report = VariableReport {
        variable: variable.to_string(),
        kind,
        grid,
        classes: pair.class_presence.get(variable).cloned(),
        smoothed,
        at_risk,
        measurement,
    };
    (Some(report), rec.failures)
}

/// Computes every metric for every selected variable. Metric failures are
/// collected rather than aborting the run.
pub fn evaluate(
    pair: &DatasetPair,
    config: &RunConfig,
    strata: Option<&StratumAssignment>,
) -> Result<ComparisonReport> {
    config.validate()?;
    let available: Vec<String> = pair.unified_specs.keys().cloned().collect();
    let variables = selected_variables(config, &available)?;
    let results: Vec<(Option<VariableReport>, Vec<Failure>)> = variables
        .par_iter()
        .map(|v| evaluate_variable(pair, v, config, strata))
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, f) in results {
        reports.extend(r);
        failures.extend(f);
    }
    Ok(ComparisonReport {
        metadata: Metadata::new(config, variables, pair.excluded.clone()),
        variables: reports,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub variable: String,
    pub grid: TimeGrid,
    pub reference: ProtocolBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub metadata: Metadata,
    pub variables: Vec<ReferenceEntry>,
    pub failures: Vec<Failure>,
}

/// Original-vs-original baselines between disjoint halves of the roster.
pub fn reference(original: &LongDataset, config: &RunConfig) -> Result<ReferenceReport> {
    config.validate()?;
    if original.n_subjects() < 2 {
        return Err(Error::Validation(format!(
            "a reference baseline needs at least two subjects, got {}",
            original.n_subjects()
        )));
    }
    let available: Vec<String> = original.variable_ids().map(str::to_string).collect();
    let variables = selected_variables(config, &available)?;
    let results: Vec<(Option<ReferenceEntry>, Vec<Failure>)> = variables
        .par_iter()
        .map(|v| {
            let mut rec = Recorder {
                variable: v,
                failures: Vec::new(),
            };
            let entry = rec
                .keep(
                    "*",
                    None,
                    original.variable(v).and_then(|data| {
                        let step = config.grid_step_for(v, data.spec.grid_step);
                        build_time_grid(data.times(), std::iter::empty(), step)
                            .map_err(|_| Error::NoMeasurements(v.clone()))
                    }),
                )
                .and_then(|grid| {
                    let block = rec.keep(
                        "measurement",
                        None,
                        reference_protocol(original, v, &grid, &config.protocol()),
                    )?;
                    Some(ReferenceEntry {
                        variable: v.clone(),
                        grid,
                        reference: block,
                    })
                });
            (entry, rec.failures)
        })
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (e, f) in results {
        entries.extend(e);
        failures.extend(f);
    }
    Ok(ReferenceReport {
        metadata: Metadata::new(config, variables, Vec::new()),
        variables: entries,
        failures,
    })
}

/// Looks up a bandwidth by value.
pub fn smoothed_at(report: &VariableReport, h: Bandwidth) -> Option<&SmoothedMetrics> {
    report.smoothed.iter().find(|m| m.bandwidth == h.value())
}
