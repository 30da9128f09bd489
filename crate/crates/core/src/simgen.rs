//! Ground-truth generators: continuous mixed-effects processes with serial
//! correlation, discrete Markov chains, and an observation design that
//! thins measurements and truncates subjects at a geometric dropout time.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LongDataset, Series, SeriesValues, TimeGrid, VariableData, VariableKind, VariableSpec};

/// Seed for the `index`-th independent component of a run.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn subject_rng(seed: u64, subject: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64);
    rng
}

/// Subject ids `s00001`, `s00002`, ... padded so they sort numerically.
pub fn subject_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(5);
    (1..=n).map(|i| format!("s{i:0width$}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeanFunction {
    Constant {
        value: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Periodic {
        level: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Default for MeanFunction {
    fn default() -> Self {
        MeanFunction::Constant { value: 0.0 }
    }
}

impl MeanFunction {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            MeanFunction::Constant { value } => value,
            MeanFunction::Linear { intercept, slope } => intercept + slope * t,
            MeanFunction::Periodic {
                level,
                amplitude,
                period,
                phase,
            } => level + amplitude * (std::f64::consts::TAU * t / period + phase).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MeanFunction::Constant { value } => value.is_finite(),
            MeanFunction::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            MeanFunction::Periodic {
                level,
                amplitude,
                period,
                phase,
            } => level.is_finite() && amplitude.is_finite() && phase.is_finite() && period.is_finite() && period > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("mean: invalid parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerialKind {
    #[default]
    Exponential,
    Gaussian,
}

impl SerialKind {
    pub fn correlation(self, u: f64, range: f64) -> f64 {
        let r = u.abs() / range;
        match self {
            SerialKind::Exponential => (-r).exp(),
            SerialKind::Gaussian => (-r * r).exp(),
        }
    }
}

/// `x_i(t) = mean(t) + b_i + W_i(t) + e` with `b_i ~ N(0, intercept_var)`,
/// `W_i` a stationary Gaussian process of variance `serial_var`, and
/// `e ~ N(0, nugget_var)` per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousModel {
    #[serde(default)]
    pub mean: MeanFunction,
    #[serde(default)]
    pub nugget_var: f64,
    #[serde(default)]
    pub serial_var: f64,
    #[serde(default = "one")]
    pub serial_range: f64,
    #[serde(default)]
    pub serial_kind: SerialKind,
    #[serde(default)]
    pub intercept_var: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ContinuousModel {
    fn default() -> Self {
        Self {
            mean: MeanFunction::default(),
            nugget_var: 0.0,
            serial_var: 0.0,
            serial_range: 1.0,
            serial_kind: SerialKind::default(),
            intercept_var: 0.0,
        }
    }
}

impl ContinuousModel {
    pub fn validate(&self) -> Result<()> {
        self.mean.validate()?;
        for (name, v) in [
            ("nugget_var", self.nugget_var),
            ("serial_var", self.serial_var),
            ("intercept_var", self.intercept_var),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        if !(self.serial_range.is_finite() && self.serial_range > 0.0) {
            return Err(Error::Config(format!(
                "serial_range must be positive, got {}",
                self.serial_range
            )));
        }
        Ok(())
    }

    /// Theoretical semivariogram `nugget + serial * (1 - corr(u))`.
    pub fn variogram(&self, u: f64) -> f64 {
        self.nugget_var + self.serial_var * (1.0 - self.serial_kind.correlation(u, self.serial_range))
    }
}

/// Time-homogeneous Markov chain over `classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteModel {
    pub classes: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

const STOCHASTIC_TOLERANCE: f64 = 1e-12;

fn check_distribution(name: &str, p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::Config(format!(
            "{name}: expected {k} probabilities, got {}",
            p.len()
        )));
    }
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Config(format!(
            "{name}: probabilities must be finite and non-negative"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::Config(format!("{name}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl DiscreteModel {
    pub fn validate(&self) -> Result<()> {
        VariableSpec::discrete("model", self.classes.iter().cloned())
            .validate()
            .map_err(|e| Error::Config(format!("classes: {e}")))?;
        let k = self.classes.len();
        check_distribution("initial", &self.initial, k)?;
        if self.transition.len() != k {
            return Err(Error::Config(format!(
                "transition: expected {k} rows, got {}",
                self.transition.len()
            )));
        }
        for (a, row) in self.transition.iter().enumerate() {
            check_distribution(&format!("transition row {a}"), row, k)?;
        }
        Ok(())
    }
}

/// A constant probability or one value per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointProbability {
    Constant(f64),
    PerPoint(Vec<f64>),
}

impl PointProbability {
    pub fn at(&self, m: usize) -> f64 {
        match self {
            PointProbability::Constant(p) => *p,
            PointProbability::PerPoint(v) => v[m],
        }
    }

    fn validate(&self, name: &str, points: usize) -> Result<()> {
        let values: &[f64] = match self {
            PointProbability::Constant(p) => std::slice::from_ref(p),
            PointProbability::PerPoint(v) => {
                if v.len() != points {
                    return Err(Error::Config(format!(
                        "{name}: expected {points} values, got {}",
                        v.len()
                    )));
                }
                v
            }
        };
        match values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            Some(p) => Err(Error::Config(format!("{name}: {p} is not a probability"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDesign {
    #[serde(default)]
    pub start: f64,
    #[serde(default = "one")]
    pub step: f64,
    pub points: usize,
}

impl GridDesign {
    pub fn times(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.start + m as f64 * self.step).collect()
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.start, self.start + (self.points - 1) as f64 * self.step, self.step)
    }
}

/// Who is simulated, on which grid, and how measurements are thinned.
///
/// Each grid point is kept with `keep_probability`; after each grid point a
/// subject leaves for good with probability `dropout_hazard`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationDesign {
    pub subjects: usize,
    pub grid: GridDesign,
    #[serde(default = "always")]
    pub keep_probability: PointProbability,
    #[serde(default = "never")]
    pub dropout_hazard: PointProbability,
}

fn always() -> PointProbability {
    PointProbability::Constant(1.0)
}

fn never() -> PointProbability {
    PointProbability::Constant(0.0)
}

impl ObservationDesign {
    pub fn full(subjects: usize, points: usize) -> Self {
        Self {
            subjects,
            grid: GridDesign {
                start: 0.0,
                step: 1.0,
                points,
            },
            keep_probability: always(),
            dropout_hazard: never(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 {
            return Err(Error::Config("subjects: at least one subject is required".into()));
        }
        if self.grid.points == 0 {
            return Err(Error::Config("grid.points: at least one grid point is required".into()));
        }
        if !(self.grid.step.is_finite() && self.grid.step > 0.0) || !self.grid.start.is_finite() {
            return Err(Error::Config(format!(
                "grid: start must be finite and step positive, got start {} step {}",
                self.grid.start, self.grid.step
            )));
        }
        self.keep_probability.validate("keep_probability", self.grid.points)?;
        self.dropout_hazard.validate("dropout_hazard", self.grid.points)
    }

    /// Grid index of the last point a subject can be observed at.
    fn dropout_index(&self, rng: &mut impl Rng) -> usize {
        let last = self.grid.points - 1;
        (0..last)
            .find(|&m| rng.gen::<f64>() < self.dropout_hazard.at(m))
            .unwrap_or(last)
    }
}

/// Lower factor `L` with `L L^T = cov`, falling back to an eigen
/// decomposition when the matrix is numerically singular.
fn covariance_factor(cov: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l();
    }
    let eig = SymmetricEigen::new(cov);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

fn full_continuous(id: &str, model: &ContinuousModel, design: &ObservationDesign, seed: u64) -> Result<LongDataset> {
    model.validate()?;
    design.validate()?;
    let times = design.grid.times();
    let m = times.len();
    let mean: Vec<f64> = times.iter().map(|&t| model.mean.at(t)).collect();
    let factor = (model.serial_var > 0.0).then(|| {
        let cov = DMatrix::from_fn(m, m, |a, b| {
            model.serial_var * model.serial_kind.correlation(times[a] - times[b], model.serial_range)
        });
        covariance_factor(cov)
    });
    let (nu, tau) = (model.intercept_var.sqrt(), model.nugget_var.sqrt());
    let series: Vec<Series> = (0..design.subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i);
            let b = nu * rng.sample::<f64, _>(StandardNormal);
            let serial = factor.as_ref().map(|l| {
                let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
                l * z
            });
            let values = (0..m)
                .map(|k| {
                    let w = serial.as_ref().map_or(0.0, |s| s[k]);
                    let e = tau * rng.sample::<f64, _>(StandardNormal);
                    mean[k] + b + w + e
                })
                .collect();
            Series {
                times: times.clone(),
                values: SeriesValues::Continuous(values),
            }
        })
        .collect();
    let spec = VariableSpec::continuous(id).with_grid_step(design.grid.step);
    LongDataset::from_parts(subject_ids(design.subjects), vec![VariableData { spec, series }])
}

fn full_discrete(id: &str, model: &DiscreteModel, design: &ObservationDesign, seed: u64) -> Result<LongDataset> {
    model.validate()?;
    design.validate()?;
    let times = design.grid.times();
    let initial = WeightedIndex::new(&model.initial).map_err(|e| Error::Config(format!("initial: {e}")))?;
    // Rows with a single unit mass are fine; WeightedIndex only rejects all-zero rows.
    let rows: Vec<WeightedIndex<f64>> = model
        .transition
        .iter()
        .enumerate()
        .map(|(a, r)| WeightedIndex::new(r).map_err(|e| Error::Config(format!("transition row {a}: {e}"))))
        .collect::<Result<_>>()?;
    let series: Vec<Series> = (0..design.subjects)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i);
            let mut state = initial.sample(&mut rng);
            let mut values = Vec::with_capacity(times.len());
            values.push(state);
            for _ in 1..times.len() {
                state = rows[state].sample(&mut rng);
                values.push(state);
            }
            Series {
                times: times.clone(),
                values: SeriesValues::Discrete(values),
            }
        })
        .collect();
    let spec = VariableSpec::discrete(id, model.classes.iter().cloned()).with_grid_step(design.grid.step);
    LongDataset::from_parts(subject_ids(design.subjects), vec![VariableData { spec, series }])
}

pub fn simulate_continuous(
    id: &str,
    model: &ContinuousModel,
    design: &ObservationDesign,
    seed: u64,
) -> Result<LongDataset> {
    let full = full_continuous(id, model, design, derive_seed(seed, 0))?;
    apply_design(&full, design, derive_seed(seed, 1))
}

pub fn simulate_discrete(
    id: &str,
    model: &DiscreteModel,
    design: &ObservationDesign,
    seed: u64,
) -> Result<LongDataset> {
    let full = full_discrete(id, model, design, derive_seed(seed, 0))?;
    apply_design(&full, design, derive_seed(seed, 1))
}

/// Thins every variable independently per grid point and truncates each
/// subject, across all variables, at one geometric dropout time. Subjects
/// left without any observation are removed.
pub fn apply_design(dataset: &LongDataset, design: &ObservationDesign, seed: u64) -> Result<LongDataset> {
    design.validate()?;
    let grid = design.grid.time_grid()?;
    let ids: Vec<&str> = dataset.variable_ids().collect();
    let n = dataset.n_subjects();
    // kept[i][v] = indices of observations retained for subject i, variable v.
    let kept: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i);
            let last = design.dropout_index(&mut rng);
            ids.iter()
                .map(|id| {
                    let s = &dataset.variable(id).expect("listed variable").series[i];
                    s.times
                        .iter()
                        .enumerate()
                        .filter(|(_, &t)| {
                            let m = grid.nearest_index(t);
                            let keep = rng.gen::<f64>() < design.keep_probability.at(m);
                            keep && m <= last
                        })
                        .map(|(k, _)| k)
                        .collect()
                })
                .collect()
        })
        .collect();

    let variables = ids
        .iter()
        .enumerate()
        .map(|(v, id)| {
            let data = dataset.variable(id).expect("listed variable");
            let series = data
                .series
                .iter()
                .zip(&kept)
                .map(|(s, k)| {
                    let idx = &k[v];
                    let times = idx.iter().map(|&j| s.times[j]).collect();
                    let values = match &s.values {
                        SeriesValues::Continuous(x) => SeriesValues::Continuous(idx.iter().map(|&j| x[j]).collect()),
                        SeriesValues::Discrete(c) => SeriesValues::Discrete(idx.iter().map(|&j| c[j]).collect()),
                    };
                    Series { times, values }
                })
                .collect();
            VariableData {
                spec: data.spec.clone(),
                series,
            }
        })
        .collect();
    let thinned = LongDataset::from_parts(dataset.subjects().to_vec(), variables)?;
    let present: Vec<usize> = (0..n).filter(|&i| kept[i].iter().any(|k| !k.is_empty())).collect();
    Ok(thinned.select_subjects(&present))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableModel {
    Continuous(ContinuousModel),
    Discrete(DiscreteModel),
}

impl VariableModel {
    pub fn kind(&self) -> VariableKind {
        match self {
            VariableModel::Continuous(_) => VariableKind::Continuous,
            VariableModel::Discrete(_) => VariableKind::Discrete,
        }
    }
}

/// Several variables on one subject roster sharing one design.
///
/// ```toml
/// seed = 7
///
/// [design]
/// subjects = 500
/// grid = { start = 0.0, step = 1.0, points = 48 }
/// keep_probability = 0.8
/// dropout_hazard = 0.02
///
/// [variables.sbp]
/// kind = "continuous"
/// mean = { kind = "constant", value = 120.0 }
/// nugget_var = 4.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyModel {
    #[serde(default)]
    pub seed: u64,
    pub design: ObservationDesign,
    pub variables: BTreeMap<String, VariableModel>,
}

impl StudyModel {
    pub fn parse(text: &str) -> Result<Self> {
        let study: Self = toml::from_str(text).map_err(|e| Error::Config(format!("model document: {e}")))?;
        study.validate()?;
        Ok(study)
    }

    pub fn validate(&self) -> Result<()> {
        self.design
            .validate()
            .map_err(|e| Error::Config(format!("design.{e}")))?;
        if self.variables.is_empty() {
            return Err(Error::Config("variables: the model declares no variables".into()));
        }
        for (id, model) in &self.variables {
            match model {
                VariableModel::Continuous(m) => m.validate(),
                VariableModel::Discrete(m) => m.validate(),
            }
            .map_err(|e| Error::Config(format!("variables.{id}: {e}")))?;
        }
        Ok(())
    }
}

/// Simulates every variable of `study`; `seed` overrides the document's.
pub fn simulate_study(study: &StudyModel, seed: Option<u64>) -> Result<LongDataset> {
    study.validate()?;
    let seed = seed.unwrap_or(study.seed);
    let mut variables = Vec::with_capacity(study.variables.len());
    for (k, (id, model)) in study.variables.iter().enumerate() {
        let s = derive_seed(seed, k as u64 + 2);
        let full = match model {
            VariableModel::Continuous(m) => full_continuous(id, m, &study.design, s)?,
            VariableModel::Discrete(m) => full_discrete(id, m, &study.design, s)?,
        };
        variables.push(full.variable(id)?.clone());
    }
    let full = LongDataset::from_parts(subject_ids(study.design.subjects), variables)?;
    apply_design(&full, &study.design, derive_seed(seed, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::transition_profile;
    use crate::kernel::Bandwidth;
    use crate::marginal::class_profile;
    use crate::measurement::dropout_distribution;
    use crate::measurement::smoothed_kl;
    use crate::model::{build_measurement_matrix, dropout_points};

    fn noise(tau: f64, sigma: f64, nu: f64) -> ContinuousModel {
        ContinuousModel {
            mean: MeanFunction::Linear {
                intercept: 1.0,
                slope: 0.5,
            },
            nugget_var: tau,
            serial_var: sigma,
            serial_range: 3.0,
            serial_kind: SerialKind::Exponential,
            intercept_var: nu,
        }
    }

    #[test]
    fn noiseless_model_is_the_mean() {
        let ds = simulate_continuous("x", &noise(0.0, 0.0, 0.0), &ObservationDesign::full(5, 10), 1).unwrap();
        for s in &ds.variable("x").unwrap().series {
            for (t, x) in s.times.iter().zip(s.continuous().unwrap()) {
                assert_eq!(*x, 1.0 + 0.5 * t);
            }
        }
    }

    #[test]
    fn intercept_only_is_a_constant_offset() {
        let ds = simulate_continuous("x", &noise(0.0, 0.0, 1.0), &ObservationDesign::full(20, 10), 2).unwrap();
        let offsets: Vec<f64> = ds
            .variable("x")
            .unwrap()
            .series
            .iter()
            .map(|s| {
                let x = s.continuous().unwrap();
                let d: Vec<f64> = s.times.iter().zip(x).map(|(t, x)| x - (1.0 + 0.5 * t)).collect();
                assert!(d.iter().all(|v| (v - d[0]).abs() < 1e-12));
                d[0]
            })
            .collect();
        assert!(offsets.iter().any(|o| o.abs() > 0.1));
    }

    #[test]
    fn serial_process_matches_theoretical_variogram() {
        let model = ContinuousModel {
            mean: MeanFunction::Constant { value: 0.0 },
            nugget_var: 0.2,
            serial_var: 0.8,
            serial_range: 3.0,
            serial_kind: SerialKind::Exponential,
            intercept_var: 0.5,
        };
        let ds = simulate_continuous("x", &model, &ObservationDesign::full(500, 48), 20).unwrap();
        let series = &ds.variable("x").unwrap().series;
        for u in [3usize, 6, 9] {
            let (mut sum, mut count) = (0.0, 0.0);
            for s in series {
                let x = s.continuous().unwrap();
                for k in 0..x.len() - u {
                    sum += 0.5 * (x[k + u] - x[k]).powi(2);
                    count += 1.0;
                }
            }
            let empirical = sum / count;
            let truth = model.variogram(u as f64);
            assert!(
                (empirical - truth).abs() <= 0.1 * truth,
                "u={u}: {empirical} vs {truth}"
            );
        }
    }

    #[test]
    fn gaussian_kernel_covariance_is_factored() {
        let mut model = noise(0.0, 1.0, 0.0);
        model.serial_kind = SerialKind::Gaussian;
        model.serial_range = 10.0;
        let ds = simulate_continuous("x", &model, &ObservationDesign::full(50, 48), 4).unwrap();
        assert!(ds
            .variable("x")
            .unwrap()
            .series
            .iter()
            .all(|s| s.continuous().unwrap().iter().all(|x| x.is_finite())));
    }

    fn chain(transition: Vec<Vec<f64>>) -> DiscreteModel {
        let k = transition.len();
        DiscreteModel {
            classes: (0..k).map(|c| format!("c{c}")).collect(),
            transition,
            initial: vec![1.0 / k as f64; k],
        }
    }

    #[test]
    fn identity_chain_stays_put() {
        let ds = simulate_discrete(
            "c",
            &chain(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            &ObservationDesign::full(30, 10),
            5,
        )
        .unwrap();
        for s in &ds.variable("c").unwrap().series {
            let v = s.discrete().unwrap();
            assert!(v.iter().all(|c| *c == v[0]));
        }
    }

    #[test]
    fn uniform_chain_transitions_near_half() {
        let ds = simulate_discrete(
            "c",
            &chain(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            &ObservationDesign::full(1000, 24),
            6,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 23.0, 1.0).unwrap();
        let p = transition_profile(&ds, "c", &grid, Bandwidth::new(2.0).unwrap(), None).unwrap();
        for m in &p.matrices {
            for row in m.iter().flatten() {
                assert!(row.iter().all(|x| (x - 0.5).abs() <= 0.05), "{row:?}");
            }
        }
    }

    #[test]
    fn absorbing_state_profile_is_monotone() {
        let ds = simulate_discrete(
            "c",
            &chain(vec![vec![0.8, 0.2], vec![0.0, 1.0]]),
            &ObservationDesign::full(300, 20),
            8,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 19.0, 1.0).unwrap();
        let p = class_profile(&ds, "c", &grid, Bandwidth::new(1.0).unwrap()).unwrap();
        let b = p.column(1);
        assert!(b.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{b:?}");
    }

    #[test]
    fn design_identity_and_empty() {
        let full = full_continuous("x", &noise(1.0, 0.0, 0.0), &ObservationDesign::full(10, 8), 1).unwrap();
        assert_eq!(apply_design(&full, &ObservationDesign::full(10, 8), 3).unwrap(), full);
        let mut none = ObservationDesign::full(10, 8);
        none.keep_probability = PointProbability::Constant(0.0);
        let empty = apply_design(&full, &none, 3).unwrap();
        assert_eq!(empty.n_subjects(), 0);
        assert_eq!(empty.observation_count(), 0);
    }

    #[test]
    fn geometric_dropout() {
        let points = 12;
        let mut design = ObservationDesign::full(1000, points);
        design.dropout_hazard = PointProbability::Constant(0.1);
        let ds = simulate_continuous("x", &noise(1.0, 0.0, 0.0), &design, 12).unwrap();
        let grid = design.grid.time_grid().unwrap();
        let empirical =
            dropout_distribution(&dropout_points(&build_measurement_matrix(&ds, "x", &grid).unwrap())).unwrap();
        let mut truth: Vec<f64> = (0..points).map(|d| 0.9f64.powi(d as i32) * 0.1).collect();
        truth[points - 1] = 0.9f64.powi(points as i32 - 1);
        let kl = smoothed_kl(&empirical, &truth, 1e-6).unwrap();
        assert!(kl < 0.01, "{kl}");
    }

    #[test]
    fn seeded_and_validated() {
        let d = ObservationDesign::full(10, 5);
        let m = noise(1.0, 1.0, 1.0);
        assert_eq!(
            simulate_continuous("x", &m, &d, 3).unwrap(),
            simulate_continuous("x", &m, &d, 3).unwrap()
        );
        assert_ne!(
            simulate_continuous("x", &m, &d, 3).unwrap(),
            simulate_continuous("x", &m, &d, 4).unwrap()
        );
        assert!(simulate_continuous("x", &m, &ObservationDesign::full(0, 5), 3).is_err());
        let mut bad = m.clone();
        bad.serial_range = 0.0;
        assert!(bad.validate().unwrap_err().to_string().contains("serial_range"));
        let mut rows = chain(vec![vec![0.5, 0.4], vec![0.5, 0.5]]);
        assert!(rows.validate().unwrap_err().to_string().contains("row 0"));
        rows.transition[0][1] = 0.5;
        rows.initial = vec![1.0];
        assert!(rows.validate().unwrap_err().to_string().contains("initial"));
    }

    #[test]
    fn study_document() {
        let study = StudyModel::parse(
            r#"
seed = 7

[design]
subjects = 40
grid = { start = 0.0, step = 2.0, points = 12 }
keep_probability = 0.7
dropout_hazard = 0.05

[variables.sbp]
kind = "continuous"
mean = { kind = "periodic", level = 120.0, amplitude = 5.0, period = 24.0 }
nugget_var = 4.0
serial_var = 9.0
serial_range = 6.0

[variables.gcs]
kind = "discrete"
classes = ["low", "mid", "high"]
initial = [0.2, 0.3, 0.5]
transition = [[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.2, 0.8]]
"#,
        )
        .unwrap();
        let a = simulate_study(&study, None).unwrap();
        assert_eq!(a, simulate_study(&study, Some(7)).unwrap());
        assert_eq!(a.spec("sbp").unwrap().grid_step, 2.0);
        assert!(a.n_subjects() <= 40 && a.n_subjects() > 20);
        assert!(a.observation_count() < 2 * 40 * 12);

        let err =
            StudyModel::parse("[design]\nsubjects = 0\ngrid = { points = 3 }\n[variables.x]\nkind = \"continuous\"\n")
                .unwrap_err();
        assert!(err.to_string().contains("subjects"));
        let err = StudyModel::parse(
            "[design]\nsubjects = 1\ngrid = { points = 3 }\n[variables.x]\nkind = \"continuous\"\nnugget_var = -1.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("variables.x") && err.to_string().contains("nugget_var"));
    }
}
