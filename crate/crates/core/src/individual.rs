//! Subject trajectories, stratified by baseline quantile class and
//! subsampled with a fixed seed for plotting.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::rank_bin;
use crate::error::{Error, Result};
use crate::kernel::Bandwidth;
use crate::marginal::{ContinuousSmoother, QuantileLevels};
use crate::model::{LongDataset, TimeGrid};

pub const DEFAULT_PER_STRATUM: usize = 20;

/// Maps subjects to stratum labels; `order` fixes the display order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StratumAssignment {
    pub order: Vec<String>,
    pub members: BTreeMap<String, String>,
}

impl StratumAssignment {
    /// Builds from `(subject, stratum)` pairs; strata are ordered by label.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut members = BTreeMap::new();
        for (subject, stratum) in pairs {
            if let Some(prev) = members.insert(subject.clone(), stratum.clone()) {
                if prev != stratum {
                    return Err(Error::Validation(format!(
                        "subject `{subject}` assigned to both `{prev}` and `{stratum}`"
                    )));
                }
            }
        }
        let mut order: Vec<String> = members.values().cloned().collect();
        order.sort();
        order.dedup();
        Ok(Self { order, members })
    }

    pub fn stratum_of(&self, subject: &str) -> Option<&str> {
        self.members.get(subject).map(String::as_str)
    }

    pub fn members_of<'a>(&'a self, stratum: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.members
            .iter()
            .filter(move |(_, s)| s.as_str() == stratum)
            .map(|(subject, _)| subject.as_str())
    }
}

/// Labels for the `Q + 1` classes cut by quantile `boundaries`.
pub fn stratum_labels(boundaries: &QuantileLevels) -> Vec<String> {
    let b = boundaries.as_slice();
    let pct = |q: f64| format!("{}", (q * 1000.0).round() / 10.0);
    let mut labels = Vec::with_capacity(b.len() + 1);
    labels.push(format!("P0-{}", pct(b[0])));
    for w in b.windows(2) {
        labels.push(format!("P{}-{}", pct(w[0]), pct(w[1])));
    }
    labels.push(format!("P{}-100", pct(b[b.len() - 1])));
    labels
}

/// Assigns each subject with at least one observation to the quantile class
/// of its first observed value, using the dataset's own quantile profile at
/// that observation's nearest grid point.
pub fn baseline_strata(
    dataset: &LongDataset,
    variable: &str,
    grid: &TimeGrid,
    h: Bandwidth,
    boundaries: &QuantileLevels,
) -> Result<StratumAssignment> {
    let data = dataset.variable(variable)?;
    let smoother = ContinuousSmoother::new(data, h)?;
    let curves = smoother.quantile_rows(grid, boundaries);
    let labels = stratum_labels(boundaries);
    let mut members = BTreeMap::new();
    for (i, s) in data.series.iter().enumerate() {
        let (Some(&t), Some(&x)) = (s.times.first(), s.continuous().and_then(|v| v.first())) else {
            continue;
        };
        let bin = rank_bin(x, &curves[grid.nearest_index(t)]);
        members.insert(dataset.subjects()[i].clone(), labels[bin - 1].clone());
    }
    Ok(StratumAssignment { order: labels, members })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub subject: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSample {
    pub label: String,
    /// Members of the stratum with observations of the variable.
    pub size: usize,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPanel {
    pub seed: u64,
    pub per_stratum: usize,
    pub strata: Vec<StratumSample>,
}

/// Seeded sample of up to `per_stratum` raw trajectories from each stratum.
pub fn sample_trajectories(
    dataset: &LongDataset,
    variable: &str,
    strata: &StratumAssignment,
    per_stratum: usize,
    seed: u64,
) -> Result<TrajectoryPanel> {
    let data = dataset.variable(variable)?;
    data.require_kind(crate::model::VariableKind::Continuous)?;
    let mut out = Vec::with_capacity(strata.order.len());
    for (k, label) in strata.order.iter().enumerate() {
        let members: Vec<usize> = dataset
            .subjects()
            .iter()
            .enumerate()
            .filter(|(i, s)| strata.stratum_of(s) == Some(label.as_str()) && !data.series[*i].is_empty())
            .map(|(i, _)| i)
            .collect();
        let mut chosen: Vec<usize> = if members.len() <= per_stratum {
            members.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            sample(&mut rng, members.len(), per_stratum)
                .into_iter()
                .map(|j| members[j])
                .collect()
        };
        chosen.sort_unstable();
        let trajectories = chosen
            .into_iter()
            .map(|i| {
                let s = &data.series[i];
                Trajectory {
                    subject: dataset.subjects()[i].clone(),
                    times: s.times.clone(),
                    values: s.continuous().expect("kind checked").to_vec(),
                }
            })
            .collect();
        out.push(StratumSample {
            label: label.clone(),
            size: members.len(),
            trajectories,
        });
    }
    Ok(TrajectoryPanel {
        seed,
        per_stratum,
        strata: out,
    })
}
