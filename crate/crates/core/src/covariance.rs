//! Variance profile, kernel-smoothed variogram, rank-order variability and
//! local transition probabilities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{normalized_weights_into, Bandwidth};
use crate::marginal::{ContinuousSmoother, ProfileMetric, ProfileSeries, QuantileLevels};
use crate::model::{LongDataset, TimeGrid};

/// Pairs farther than this many bandwidths from the target time carry no
/// transition mass; rows with no remaining pairs are masked.
pub const TRANSITION_SUPPORT_BANDWIDTHS: f64 = 8.0;

/// Kernel-smoothed variance `sum w (x - mu(t))^2` with the mean-profile weights.
pub fn variance_profile(dataset: &LongDataset, variable: &str, grid: &TimeGrid, h: Bandwidth) -> Result<ProfileSeries> {
    let smoother = ContinuousSmoother::new(dataset.variable(variable)?, h)?;
    let mut buf = Vec::new();
    let (values, ess): (Vec<_>, Vec<_>) = grid
        .points
        .iter()
        .map(|&t| {
            let m = smoother.moments_at(t, &mut buf);
            (vec![m.variance.max(0.0)], m.ess)
        })
        .unzip();
    Ok(ProfileSeries {
        metric: ProfileMetric::Variance,
        bandwidth: Some(h.value()),
        grid: grid.points.clone(),
        columns: vec!["variance".into()],
        values,
        ess: Some(ess),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramSeries {
    pub bandwidth: f64,
    pub lags: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Within-subject pairs entering the estimate.
    pub pair_count: usize,
}

/// Multiples of the grid step up to half the grid span (at least one lag).
pub fn default_lags(grid: &TimeGrid) -> Vec<f64> {
    let half = (grid.t_max - grid.t_min) / 2.0;
    let count = ((half / grid.step) + 1e-9).floor().max(1.0) as usize;
    (1..=count).map(|m| m as f64 * grid.step).collect()
}

/// Gaps, pair counts and sums of squared differences per gap, plus the
/// total pair count.
type GapTable = (Vec<f64>, Vec<f64>, Vec<f64>, usize);

/// Squared residual differences of all within-subject pairs, aggregated by
/// exact time gap (gap -> (pair count, sum of squared differences)).
fn pair_gaps(dataset: &LongDataset, variable: &str, h: Bandwidth) -> Result<GapTable> {
    let data = dataset.variable(variable)?;
    let smoother = ContinuousSmoother::new(data, h)?;

    // Residuals use the smoothed mean at each observation's own time.
    let mut mean_cache: HashMap<u64, f64> = HashMap::new();
    let mut buf = Vec::new();
    let mut gaps: HashMap<u64, (f64, f64)> = HashMap::new();
    let mut pair_count = 0usize;
    let mut residuals = Vec::new();
    for s in &data.series {
        if s.len() < 2 {
            continue;
        }
        let values = s.continuous().expect("kind checked by smoother");
        residuals.clear();
        for (&t, &x) in s.times.iter().zip(values) {
            let mu = *mean_cache
                .entry(t.to_bits())
                .or_insert_with(|| smoother.mean_at(t, &mut buf));
            residuals.push(x - mu);
        }
        for k in 0..s.len() {
            for l in k + 1..s.len() {
                let gap = s.times[l] - s.times[k];
                let d = residuals[k] - residuals[l];
                let e = gaps.entry(gap.to_bits()).or_insert((0.0, 0.0));
                e.0 += 1.0;
                e.1 += d * d;
                pair_count += 1;
            }
        }
    }
    if pair_count == 0 {
        return Err(Error::VariogramUndefined(variable.to_string()));
    }
    let mut entries: Vec<(f64, (f64, f64))> = gaps.into_iter().map(|(g, v)| (f64::from_bits(g), v)).collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gap_values = entries.iter().map(|e| e.0).collect();
    let counts = entries.iter().map(|e| e.1 .0).collect();
    let sums = entries.iter().map(|e| e.1 .1).collect();
    Ok((gap_values, counts, sums, pair_count))
}

/// Kernel-smoothed variogram: half the pair-weighted mean squared difference
/// of within-subject residuals, pairs weighted by `K_h(u, gap)` normalized
/// over all pairs.
pub fn variogram(dataset: &LongDataset, variable: &str, lags: &[f64], h: Bandwidth) -> Result<VariogramSeries> {
    if let Some(bad) = lags.iter().find(|u| !(u.is_finite() && **u > 0.0)) {
        return Err(Error::Config(format!("variogram lags must be positive, got {bad}")));
    }
    let (gaps, counts, sums, pair_count) = pair_gaps(dataset, variable, h)?;
    let mut w = Vec::new();
    let gamma = lags
        .iter()
        .map(|&u| {
            normalized_weights_into(u, &gaps, Some(&counts), h, &mut w);
            0.5 * w.iter().zip(&sums).map(|(w, s)| w * s).sum::<f64>()
        })
        .collect();
    Ok(VariogramSeries {
        bandwidth: h.value(),
        lags: lags.to_vec(),
        gamma,
        pair_count,
    })
}

/// Descriptive variance split; meaningful only for stationary variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// Variogram extrapolated linearly to lag 0 from its two smallest lags.
    pub nugget: f64,
    /// Mean variogram over the top quarter of lags.
    pub sill: f64,
    /// Mean of the variance profile over the grid.
    pub total_variance: f64,
    /// `total_variance - sill`.
    pub between_subject: f64,
}

pub fn decompose_variance(variance: &ProfileSeries, variogram: &VariogramSeries) -> Result<VarianceDecomposition> {
    let n = variogram.gamma.len();
    if n == 0 || variance.values.is_empty() {
        return Err(Error::Validation(
            "variance decomposition needs a non-empty variogram and variance profile".into(),
        ));
    }
    let nugget = if n == 1 {
        variogram.gamma[0]
    } else {
        let (u1, u2) = (variogram.lags[0], variogram.lags[1]);
        let (g1, g2) = (variogram.gamma[0], variogram.gamma[1]);
        let slope = (g2 - g1) / (u2 - u1);
        (g1 - slope * u1).clamp(0.0, g1.max(0.0))
    };
    let top = n.div_ceil(4);
    let sill = variogram.gamma[n - top..].iter().sum::<f64>() / top as f64;
    let total_variance = variance.values.iter().map(|r| r[0]).sum::<f64>() / variance.values.len() as f64;
    Ok(VarianceDecomposition {
        nugget,
        sill,
        total_variance,
        between_subject: total_variance - sill,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVariabilityDistribution {
    /// Number of quantile levels `Q`.
    pub levels: usize,
    pub subjects: Vec<String>,
    pub values: Vec<f64>,
    /// Subjects skipped for having fewer than two observations.
    pub excluded: usize,
}

/// Bin index in `1..=Q+1`: `l` such that `Q_{l-1} < x <= Q_l`, with
/// `Q_0 = -inf` and `Q_{Q+1} = +inf`.
pub fn rank_bin(x: f64, quantiles: &[f64]) -> usize {
    quantiles.partition_point(|&q| q < x) + 1
}

/// `(1/Q) (1/(n-1)) sum_k (R_{k+1} - R_k)` over consecutive bins.
pub fn rank_variability_from_bins(bins: &[usize], levels: usize) -> f64 {
    let steps: i64 = bins.windows(2).map(|w| w[1] as i64 - w[0] as i64).sum();
    steps as f64 / (levels as f64 * (bins.len() - 1) as f64)
}

/// Per-subject kernel-smoothed rank-order variability against the
/// dataset's own quantile profile (evaluated at each observation's nearest
/// grid point).
pub fn rank_order_variability(
    dataset: &LongDataset,
    variable: &str,
    grid: &TimeGrid,
    h: Bandwidth,
    levels: &QuantileLevels,
) -> Result<RankVariabilityDistribution> {
    let data = dataset.variable(variable)?;
    let smoother = ContinuousSmoother::new(data, h)?;
    let curves = smoother.quantile_rows(grid, levels);
    let mut out = RankVariabilityDistribution {
        levels: levels.len(),
        subjects: Vec::new(),
        values: Vec::new(),
        excluded: 0,
    };
    let mut bins = Vec::new();
    for (i, s) in data.series.iter().enumerate() {
        if s.len() < 2 {
            out.excluded += 1;
            continue;
        }
        let values = s.continuous().expect("kind checked by smoother");
        bins.clear();
        bins.extend(
            s.times
                .iter()
                .zip(values)
                .map(|(&t, &x)| rank_bin(x, &curves[grid.nearest_index(t)])),
        );
        out.subjects.push(dataset.subjects()[i].clone());
        out.values.push(rank_variability_from_bins(&bins, levels.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionProfile {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub classes: Vec<String>,
    /// `matrices[t][a][b]`; a row is `None` where state `a` has no pair mass.
    pub matrices: Vec<Vec<Option<Vec<f64>>>>,
}

impl TransitionProfile {
    pub fn row_series(&self, from: usize) -> Vec<Option<Vec<f64>>> {
        self.matrices.iter().map(|m| m[from].clone()).collect()
    }
}

/// Kernel-smoothed first-order transition probabilities. Each consecutive
/// pair `(k, k+1)` is weighted by `K_h(t, t - d)` with `d` the distance from
/// `t` to the farther endpoint, normalized within the source state.
/// `max_gap` drops pairs whose endpoints are further apart.
pub fn transition_profile(
    dataset: &LongDataset,
    variable: &str,
    grid: &TimeGrid,
    h: Bandwidth,
    max_gap: Option<f64>,
) -> Result<TransitionProfile> {
    let data = dataset.variable(variable)?;
    data.require_kind(crate::model::VariableKind::Discrete)?;
    let n_classes = data.spec.classes.len();

    // (start, end, from, to) for every consecutive observed pair.
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::new();
    for s in &data.series {
        let classes = s.discrete().expect("kind checked");
        for k in 1..s.len() {
            let (t0, t1) = (s.times[k - 1], s.times[k]);
            if max_gap.is_some_and(|g| t1 - t0 > g) {
                continue;
            }
            pairs.push((t0, t1, classes[k - 1], classes[k]));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Validation(format!(
            "transition profile for `{variable}` needs a subject with two or more observations"
        )));
    }

    let support = TRANSITION_SUPPORT_BANDWIDTHS * h.value();
    let scale = 2.0 * h.value() * h.value();
    let mut matrices = Vec::with_capacity(grid.len());
    let mut nearest = vec![f64::INFINITY; n_classes];
    let mut mass = vec![vec![0.0; n_classes]; n_classes];
    for &t in &grid.points {
        // K_h(t, t - d) = exp(-d^2 / 2h^2) / h; scaled per source state by the
        // closest pair so that normalization never divides by an underflow.
        nearest.fill(f64::INFINITY);
        for &(t0, t1, a, _) in &pairs {
            let d = (t - t0).abs().max((t - t1).abs());
            if d <= support && d < nearest[a] {
                nearest[a] = d;
            }
        }
        for row in mass.iter_mut() {
            row.fill(0.0);
        }
        for &(t0, t1, a, b) in &pairs {
            let d = (t - t0).abs().max((t - t1).abs());
            if d <= support {
                mass[a][b] += (-(d * d - nearest[a] * nearest[a]) / scale).exp();
            }
        }
        let matrix = mass
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                (total > 0.0).then(|| row.iter().map(|m| m / total).collect())
            })
            .collect();
        matrices.push(matrix);
    }
    Ok(TransitionProfile {
        bandwidth: h.value(),
        grid: grid.points.clone(),
        classes: data.spec.classes.clone(),
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gaussian_kernel;
    use crate::marginal::mean_profile;
    use crate::model::{Observation, VariableSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h(v: f64) -> Bandwidth {
        Bandwidth::new(v).unwrap()
    }

    fn cont(obs: &[(&str, f64, f64)]) -> LongDataset {
        LongDataset::from_observations(
            [VariableSpec::continuous("x")],
            obs.iter().map(|(s, t, x)| Observation::continuous(*s, "x", *t, *x)),
        )
        .unwrap()
    }

    fn disc(obs: &[(&str, f64, &str)], classes: &[&str]) -> LongDataset {
        LongDataset::from_observations(
            [VariableSpec::discrete("c", classes.iter().copied())],
            obs.iter().map(|(s, t, c)| Observation::discrete(*s, "c", *t, *c)),
        )
        .unwrap()
    }

    fn grid(lo: f64, hi: f64) -> TimeGrid {
        TimeGrid::new(lo, hi, 1.0).unwrap()
    }

    #[test]
    fn variance_examples() {
        let ds = cont(&[("a", 0.0, 3.0), ("a", 4.0, 3.0), ("b", 2.0, 3.0)]);
        let v = variance_profile(&ds, "x", &grid(0.0, 4.0), h(6.0)).unwrap();
        assert!(v.values.iter().all(|r| r[0].abs() < 1e-24));

        let ds = cont(&[("a", 0.0, 0.0), ("b", 10.0, 10.0)]);
        let v = variance_profile(&ds, "x", &grid(0.0, 10.0), h(6.0)).unwrap();
        assert_abs_diff_eq!(v.values[5][0], 25.0, epsilon = 1e-12);

        let ds = cont(&[("a", 1.0, 7.5)]);
        let v = variance_profile(&ds, "x", &grid(0.0, 3.0), h(2.0)).unwrap();
        assert!(v.values.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn variance_moment_identity() {
        let obs: Vec<(String, f64, f64)> = (0..60)
            .map(|i| {
                (
                    format!("s{}", i % 9),
                    (i % 13) as f64 * 0.7,
                    ((i * 37) % 11) as f64 - 3.0,
                )
            })
            .collect();
        let refs: Vec<(&str, f64, f64)> = obs.iter().map(|(s, t, x)| (s.as_str(), *t, *x)).collect();
        let ds = cont(&refs);
        let g = grid(0.0, 9.0);
        let v = variance_profile(&ds, "x", &g, h(2.0)).unwrap();
        let m = mean_profile(&ds, "x", &g, h(2.0)).unwrap();
        let times: Vec<f64> = refs.iter().map(|r| r.1).collect();
        for (k, &t) in g.points.iter().enumerate() {
            let w = crate::kernel::normalized_weights(t, &times, h(2.0)).unwrap();
            let second: f64 = w.as_slice().iter().zip(&refs).map(|(w, r)| w * r.2 * r.2).sum();
            let mu = m.values[k][0];
            assert_abs_diff_eq!(v.values[k][0], second - mu * mu, epsilon = 1e-9);
        }
    }

    #[test]
    fn variogram_random_intercept_is_zero() {
        let ds = cont(&[
            ("a", 0.0, 1.0),
            ("a", 1.0, 1.0),
            ("a", 2.0, 1.0),
            ("b", 0.0, 4.0),
            ("b", 1.0, 4.0),
            ("b", 2.0, 4.0),
        ]);
        let vg = variogram(&ds, "x", &[1.0, 2.0], h(1.0)).unwrap();
        assert!(vg.gamma.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn variogram_single_pair_by_hand() {
        // Flat mean 1 comes from a second subject whose observations do not pair.
        let ds = cont(&[("a", 0.0, 0.0), ("a", 1.0, 2.0)]);
        let vg = variogram(&ds, "x", &[1.0], h(1.0)).unwrap();
        // Smoothed mean at t=0 and t=1 differ, so compute residuals the same way.
        let m = mean_profile(&ds, "x", &grid(0.0, 1.0), h(1.0)).unwrap();
        let r0 = 0.0 - m.values[0][0];
        let r1 = 2.0 - m.values[1][0];
        assert_abs_diff_eq!(vg.gamma[0], 0.5 * (r0 - r1).powi(2), epsilon = 1e-12);

        // With a flat mean of 1 (symmetric design), residuals are -1 and +1.
        let ds = cont(&[("a", 0.0, 0.0), ("a", 1.0, 2.0), ("b", 0.0, 2.0), ("c", 1.0, 0.0)]);
        let m = mean_profile(&ds, "x", &grid(0.0, 1.0), h(1.0)).unwrap();
        assert_abs_diff_eq!(m.values[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.values[1][0], 1.0, epsilon = 1e-12);
        let vg = variogram(&ds, "x", &[1.0], h(1.0)).unwrap();
        assert_abs_diff_eq!(vg.gamma[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn variogram_errors() {
        let ds = cont(&[("a", 0.0, 1.0), ("b", 1.0, 2.0)]);
        assert!(matches!(
            variogram(&ds, "x", &[1.0], h(1.0)),
            Err(Error::VariogramUndefined(_))
        ));
        let ds = cont(&[("a", 0.0, 1.0), ("a", 1.0, 2.0)]);
        assert!(variogram(&ds, "x", &[0.0], h(1.0)).is_err());
    }

    /// Literal triple sum with per-pair weights, no gap aggregation.
    fn variogram_oracle(ds: &LongDataset, u: f64, hh: Bandwidth) -> (f64, f64) {
        let data = ds.variable("x").unwrap();
        let all_times: Vec<f64> = data.times().collect();
        let all_values: Vec<f64> = data
            .series
            .iter()
            .flat_map(|s| s.continuous().unwrap().iter().copied())
            .collect();
        let mu = |t: f64| {
            let w = crate::kernel::normalized_weights(t, &all_times, hh).unwrap();
            w.as_slice().iter().zip(&all_values).map(|(w, x)| w * x).sum::<f64>()
        };
        let mut pairs = Vec::new();
        for s in &data.series {
            let x = s.continuous().unwrap();
            for k in 0..s.len() {
                for l in k + 1..s.len() {
                    let d = (x[k] - mu(s.times[k])) - (x[l] - mu(s.times[l]));
                    pairs.push((s.times[l] - s.times[k], d * d));
                }
            }
        }
        let total: f64 = pairs.iter().map(|p| gaussian_kernel(u, p.0, hh)).sum();
        let weight_sum: f64 = pairs.iter().map(|p| gaussian_kernel(u, p.0, hh) / total).sum();
        let gamma = 0.5
            * pairs
                .iter()
                .map(|p| gaussian_kernel(u, p.0, hh) / total * p.1)
                .sum::<f64>();
        (gamma, weight_sum)
    }

    #[test]
    fn variogram_matches_literal_sum() {
        let obs: Vec<(String, f64, f64)> = (0..45)
            .map(|i| {
                (
                    format!("s{}", i % 6),
                    ((i * 7) % 17) as f64 * 0.5,
                    ((i * 31) % 13) as f64 * 0.3,
                )
            })
            .collect();
        let refs: Vec<(&str, f64, f64)> = obs.iter().map(|(s, t, x)| (s.as_str(), *t, *x)).collect();
        let ds = cont(&refs);
        for hh in [0.5, 2.0, 6.0] {
            let lags = [0.5, 1.0, 2.5, 4.0];
            let vg = variogram(&ds, "x", &lags, h(hh)).unwrap();
            for (u, g) in lags.iter().zip(&vg.gamma) {
                let (expected, weight_sum) = variogram_oracle(&ds, *u, h(hh));
                assert_abs_diff_eq!(weight_sum, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(*g, expected, epsilon = 1e-9);
                assert!(*g >= 0.0);
            }
        }
    }

    #[test]
    fn default_lag_rule() {
        assert_eq!(default_lags(&grid(0.0, 10.0)), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(default_lags(&grid(0.0, 47.0)).len(), 23);
        assert_eq!(default_lags(&grid(0.0, 1.0)), vec![1.0]);
    }

    #[test]
    fn decomposition_extrapolates_nugget() {
        let vg = VariogramSeries {
            bandwidth: 1.0,
            lags: vec![1.0, 2.0, 3.0, 4.0],
            gamma: vec![0.5, 0.7, 0.9, 1.0],
            pair_count: 10,
        };
        let var = ProfileSeries {
            metric: ProfileMetric::Variance,
            bandwidth: Some(1.0),
            grid: vec![0.0, 1.0],
            columns: vec!["variance".into()],
            values: vec![vec![1.4], vec![1.6]],
            ess: None,
        };
        let d = decompose_variance(&var, &vg).unwrap();
        assert_abs_diff_eq!(d.nugget, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d.sill, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.total_variance, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.between_subject, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rank_bins_follow_interval_rule() {
        let q = [1.0, 2.0, 3.0];
        assert_eq!(rank_bin(0.5, &q), 1);
        assert_eq!(rank_bin(1.0, &q), 1);
        assert_eq!(rank_bin(1.5, &q), 2);
        assert_eq!(rank_bin(3.0, &q), 3);
        assert_eq!(rank_bin(3.5, &q), 4);
    }

    #[test]
    fn rank_variability_examples() {
        assert_eq!(rank_variability_from_bins(&[3, 3, 3], 5), 0.0);
        assert_eq!(rank_variability_from_bins(&[1, 6], 5), 1.0);
        assert_abs_diff_eq!(rank_variability_from_bins(&[2, 4, 3], 5), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rank_variability_skips_single_observations() {
        let ds = cont(&[("a", 0.0, 1.0), ("a", 1.0, 1.0), ("b", 0.0, 2.0)]);
        let r = rank_order_variability(&ds, "x", &grid(0.0, 1.0), h(6.0), &QuantileLevels::default()).unwrap();
        assert_eq!(r.subjects, vec!["a".to_string()]);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.values, vec![0.0]);
    }

    #[test]
    fn transitions_single_state_and_single_pair() {
        let ds = disc(
            &[("s", 0.0, "a"), ("s", 1.0, "a"), ("t", 2.0, "a"), ("t", 3.0, "a")],
            &["a", "b"],
        );
        let p = transition_profile(&ds, "c", &grid(0.0, 3.0), h(1.0), None).unwrap();
        for m in &p.matrices {
            assert_eq!(m[0], Some(vec![1.0, 0.0]));
            assert_eq!(m[1], None);
        }

        let ds = disc(&[("s", 0.0, "a"), ("s", 1.0, "b")], &["a", "b"]);
        let p = transition_profile(&ds, "c", &grid(0.0, 3.0), h(1.0), None).unwrap();
        assert!(p.matrices.iter().all(|m| m[0] == Some(vec![0.0, 1.0])));
    }

    #[test]
    fn transitions_symmetric_pairs_split_evenly() {
        // Pairs (1,2) a->b and (3,4) a->a are equidistant from t = 2.5.
        let ds = disc(
            &[("s", 1.0, "a"), ("s", 2.0, "b"), ("t", 3.0, "a"), ("t", 4.0, "a")],
            &["a", "b"],
        );
        let g = TimeGrid::new(0.5, 4.5, 1.0).unwrap();
        let p = transition_profile(&ds, "c", &g, h(1.0), None).unwrap();
        let d1 = (2.5f64 - 1.0).abs().max((2.5f64 - 2.0).abs());
        let d2 = (2.5f64 - 3.0).abs().max((2.5f64 - 4.0).abs());
        assert_eq!(
            gaussian_kernel(2.5, 2.5 - d1, h(1.0)),
            gaussian_kernel(2.5, 2.5 - d2, h(1.0))
        );
        let row = p.matrices[2][0].as_ref().unwrap();
        assert_abs_diff_eq!(row[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(row[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn transitions_mask_far_regions_and_filter_gaps() {
        let ds = disc(
            &[("s", 0.0, "a"), ("s", 1.0, "b"), ("t", 0.0, "b"), ("t", 60.0, "a")],
            &["a", "b"],
        );
        let g = TimeGrid::new(0.0, 60.0, 1.0).unwrap();
        let p = transition_profile(&ds, "c", &g, h(1.0), None).unwrap();
        assert!(p.matrices[0][0].is_some());
        assert!(p.matrices[30][0].is_none());
        // The b->a pair spans 60 time units and is dropped by a gap filter.
        let p = transition_profile(&ds, "c", &g, h(30.0), Some(10.0)).unwrap();
        assert!(p.matrices.iter().all(|m| m[1].is_none()));
        assert!(transition_profile(&disc(&[("s", 0.0, "a")], &["a"]), "c", &g, h(1.0), None).is_err());
    }

    proptest! {
        #[test]
        fn rank_variability_telescopes(bins in prop::collection::vec(1usize..=6, 2..30)) {
            let r = rank_variability_from_bins(&bins, 5);
            let telescoped = (bins[bins.len() - 1] as f64 - bins[0] as f64) / (5.0 * (bins.len() - 1) as f64);
            prop_assert_eq!(r, telescoped);
            prop_assert!((-1.0..=1.0).contains(&r));
        }

        #[test]
        fn transition_rows_stochastic(
            seq in prop::collection::vec((0usize..3, 0usize..4), 2..40),
            hh in 0.3..8.0f64,
        ) {
            let labels = ["a", "b", "c"];
            let obs: Vec<(String, f64, &str)> = seq
                .iter()
                .enumerate()
                .map(|(k, (c, s))| (format!("s{s}"), k as f64 * 0.5, labels[*c]))
                .collect();
            let refs: Vec<(&str, f64, &str)> = obs.iter().map(|(s, t, c)| (s.as_str(), *t, *c)).collect();
            let ds = disc(&refs, &labels);
            let g = TimeGrid::new(0.0, 20.0, 1.0).unwrap();
            if let Ok(p) = transition_profile(&ds, "c", &g, h(hh), None) {
                for m in &p.matrices {
                    for row in m.iter().flatten() {
                        prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
                        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }
    }
}
