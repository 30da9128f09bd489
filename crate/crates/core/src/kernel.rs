//! Gaussian kernel weights and the weighted empirical CDF.
//!
//! Normalized weights are computed relative to the closest time before
//! exponentiating, so grid points far from every observation still get
//! well-defined weights instead of 0/0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 {
            Ok(Self(h))
        } else {
            Err(Error::Config(format!("bandwidth must be positive, got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Bandwidth {
    fn default() -> Self {
        Self(DEFAULT_BANDWIDTH)
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;

    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<Bandwidth> for f64 {
    fn from(h: Bandwidth) -> f64 {
        h.0
    }
}

/// `K_h(t, t') = exp(-(t - t')^2 / (2 h^2)) / h`
pub fn gaussian_kernel(t: f64, t_prime: f64, h: Bandwidth) -> f64 {
    let d = t - t_prime;
    (-(d * d) / (2.0 * h.0 * h.0)).exp() / h.0
}

/// Normalized kernel weights, parallel to the times they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `1 / sum(w^2)`
    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.0)
    }
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Weights of every observation time for smoothing at target `t`.
pub fn normalized_weights(t: f64, times: &[f64], h: Bandwidth) -> Result<WeightVector> {
    if times.is_empty() {
        return Err(Error::NoMeasurements("<weights>".into()));
    }
    let mut w = Vec::with_capacity(times.len());
    normalized_weights_into(t, times, None, h, &mut w);
    Ok(WeightVector(w))
}

/// Writes `count_k * K(t, times_k) / sum_k count_k * K(t, times_k)` divided by
/// `count_k` into `out`: the weight of a single observation at `times_k` when
/// `counts` says how many observations share that time.
pub(crate) fn normalized_weights_into(t: f64, times: &[f64], counts: Option<&[f64]>, h: Bandwidth, out: &mut Vec<f64>) {
    let scale = 2.0 * h.0 * h.0;
    let nearest = times.iter().map(|&s| (t - s) * (t - s)).fold(f64::INFINITY, f64::min);
    out.clear();
    out.extend(times.iter().map(|&s| (-((t - s) * (t - s) - nearest) / scale).exp()));
    let total: f64 = match counts {
        Some(c) => out.iter().zip(c).map(|(w, c)| w * c).sum(),
        None => out.iter().sum(),
    };
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// Observation times grouped by exact value. Sums over observations become
/// sums over distinct times, which keeps smoothing cost proportional to the
/// number of distinct measurement times.
#[derive(Debug, Clone)]
pub(crate) struct TimeGroups {
    pub times: Vec<f64>,
    pub counts: Vec<f64>,
    /// Group of each observation, parallel to the input.
    pub group_of: Vec<usize>,
}

impl TimeGroups {
    pub fn new(times: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut unique = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut group_of = vec![0; times.len()];
        for k in order {
            if unique.last() != Some(&times[k]) {
                unique.push(times[k]);
                counts.push(0.0);
            }
            *counts.last_mut().unwrap() += 1.0;
            group_of[k] = unique.len() - 1;
        }
        Self {
            times: unique,
            counts,
            group_of,
        }
    }

    /// Per-observation weight for each group at target `t`.
    pub fn weights_at(&self, t: f64, h: Bandwidth, out: &mut Vec<f64>) {
        normalized_weights_into(t, &self.times, Some(&self.counts), h, out);
    }

    /// Effective sample size from group weights.
    pub fn ess(&self, group_weights: &[f64]) -> f64 {
        1.0 / group_weights
            .iter()
            .zip(&self.counts)
            .map(|(w, c)| c * w * w)
            .sum::<f64>()
    }
}

/// Step function `F(z)` stored at its distinct jump points.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEcdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WeightedEcdf {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `F(z) = sum of weights of values <= z`
    pub fn cdf(&self, z: f64) -> f64 {
        match self.values.partition_point(|&v| v <= z) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// Generalized inverse `inf { z : F(z) >= q }`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        check_level(q)?;
        if self.values.is_empty() {
            return Err(Error::NoMeasurements("<ecdf>".into()));
        }
        Ok(quantile_scan(&self.values, &self.cumulative, q))
    }
}

fn quantile_scan(values: &[f64], cumulative: &[f64], q: f64) -> f64 {
    let k = cumulative.partition_point(|&f| f < q);
    // Rounding can leave the last cumulative weight a hair below 1.
    values[k.min(values.len() - 1)]
}

pub(crate) fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("quantile level must lie in (0, 1), got {q}")))
    }
}

pub fn weighted_ecdf(values: &[f64], weights: &WeightVector) -> WeightedEcdf {
    weighted_ecdf_from(values, weights.as_slice())
}

pub(crate) fn weighted_ecdf_from(values: &[f64], weights: &[f64]) -> WeightedEcdf {
    assert_eq!(values.len(), weights.len(), "values and weights must be parallel");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    ecdf_in_order(values, &order, |k| weights[k])
}

/// ECDF over `values` visited in ascending `order`.
pub(crate) fn ecdf_in_order(values: &[f64], order: &[usize], weight: impl Fn(usize) -> f64) -> WeightedEcdf {
    let mut out = WeightedEcdf {
        values: Vec::new(),
        cumulative: Vec::new(),
    };
    let mut acc = 0.0;
    for &k in order {
        acc += weight(k);
        if out.values.last() == Some(&values[k]) {
            *out.cumulative.last_mut().unwrap() = acc;
        } else {
            out.values.push(values[k]);
            out.cumulative.push(acc);
        }
    }
    out
}

pub fn weighted_quantile(ecdf: &WeightedEcdf, q: f64) -> Result<f64> {
    ecdf.quantile(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h(v: f64) -> Bandwidth {
        Bandwidth::new(v).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(0.0, 0.0, h(1.0)), 1.0);
        assert_abs_diff_eq!(gaussian_kernel(0.0, 1.0, h(1.0)), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_kernel(0.0, 1.0, h(1.0)), 0.60653, epsilon = 1e-5);
        assert_abs_diff_eq!(
            gaussian_kernel(0.0, 1.0, h(2.0)),
            0.5 * (-0.125f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(gaussian_kernel(0.0, 1.0, h(2.0)), 0.44125, epsilon = 1e-5);
    }

    #[test]
    fn bandwidth_must_be_positive() {
        assert!(Bandwidth::new(0.0).is_err());
        assert!(Bandwidth::new(-1.0).is_err());
        assert!(Bandwidth::new(f64::NAN).is_err());
        assert_eq!(Bandwidth::default().value(), 6.0);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(normalized_weights(17.0, &[3.0], h(1.0)).unwrap().as_slice(), &[1.0]);
        let w = normalized_weights(1.0, &[0.0, 2.0], h(1.0)).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);

        // Oracle: raw kernel values normalized by hand.
        let raw = [1.0, (-0.5f64).exp(), (-2.0f64).exp()];
        let total: f64 = raw.iter().sum();
        let w = normalized_weights(0.0, &[0.0, 1.0, 2.0], h(1.0)).unwrap();
        for (a, b) in w.as_slice().iter().zip(raw.iter().map(|r| r / total)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.as_slice()[0], 0.5741, epsilon = 1e-4);
        assert_abs_diff_eq!(w.as_slice()[1], 0.3482, epsilon = 1e-4);
        assert_abs_diff_eq!(w.as_slice()[2], 0.0777, epsilon = 1e-4);

        assert!(normalized_weights(0.0, &[], h(1.0)).is_err());
    }

    #[test]
    fn weights_survive_far_targets() {
        let w = normalized_weights(1e4, &[0.0, 1.0], h(1.0)).unwrap();
        assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-12);
        assert_eq!(w.as_slice()[1], 1.0);
    }

    #[test]
    fn ecdf_examples() {
        let uniform = WeightVector(vec![0.25; 4]);
        let f = weighted_ecdf(&[1.0, 2.0, 3.0, 4.0], &uniform);
        assert_eq!((f.cdf(1.0), f.cdf(2.0), f.cdf(4.0)), (0.25, 0.5, 1.0));
        assert_eq!(f.cdf(0.5), 0.0);
        assert_eq!(weighted_quantile(&f, 0.5).unwrap(), 2.0);

        let f = weighted_ecdf(&[7.0, 7.0, 7.0], &WeightVector(vec![0.2, 0.3, 0.5]));
        assert_eq!(f.values(), &[7.0]);
        assert_eq!(f.cdf(7.0), 1.0);
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(f.quantile(q).unwrap(), 7.0);
        }

        let f = weighted_ecdf(&[1.0, 2.0], &WeightVector(vec![0.9, 0.1]));
        assert_eq!(f.cdf(1.0), 0.9);
        assert_eq!(f.quantile(0.95).unwrap(), 2.0);
        assert!(f.quantile(0.0).is_err());
        assert!(f.quantile(1.0).is_err());
    }

    /// Brute-force inverse: scan sorted values, return the first whose
    /// cumulative sum reaches q.
    fn brute_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut candidates: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        candidates.dedup();
        for z in &candidates {
            let f: f64 = pairs.iter().filter(|p| p.0 <= *z).map(|p| p.1).sum();
            if f >= q {
                return *z;
            }
        }
        *candidates.last().unwrap()
    }

    #[test]
    fn grouped_weights_match_direct() {
        let times = [0.0, 1.0, 1.0, 2.0, 5.0, 5.0, 5.0];
        let groups = TimeGroups::new(&times);
        let mut gw = Vec::new();
        for t in [-3.0, 0.0, 1.7, 4.0, 30.0] {
            groups.weights_at(t, h(1.5), &mut gw);
            let direct = normalized_weights(t, &times, h(1.5)).unwrap();
            for (k, w) in direct.as_slice().iter().enumerate() {
                assert_abs_diff_eq!(*w, gw[groups.group_of[k]], epsilon = 1e-14);
            }
            assert_abs_diff_eq!(groups.ess(&gw), direct.effective_sample_size(), epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn kernel_symmetric(a in -100.0..100.0f64, b in -100.0..100.0f64, hh in 0.1..20.0f64) {
            prop_assert_eq!(gaussian_kernel(a, b, h(hh)), gaussian_kernel(b, a, h(hh)));
        }

        #[test]
        fn weights_normalized(times in prop::collection::vec(-50.0..50.0f64, 1..60), t in -80.0..80.0f64, hh in 0.2..24.0f64) {
            let w = normalized_weights(t, &times, h(hh)).unwrap();
            prop_assert!(w.as_slice().iter().all(|&x| x >= 0.0));
            prop_assert!((w.sum() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn ecdf_monotone_and_quantile_consistent(
            data in prop::collection::vec((-10.0..10.0f64, 0.01..1.0f64), 1..40),
            q in 0.001..0.999f64,
        ) {
            let values: Vec<f64> = data.iter().map(|d| (d.0 * 4.0).round() / 4.0).collect();
            let total: f64 = data.iter().map(|d| d.1).sum();
            let weights: Vec<f64> = data.iter().map(|d| d.1 / total).collect();
            let f = weighted_ecdf(&values, &WeightVector(weights.clone()));
            prop_assert!(f.cumulative().windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((f.cumulative().last().unwrap() - 1.0).abs() <= 1e-12);
            let z = f.quantile(q).unwrap();
            prop_assert_eq!(z, brute_quantile(&values, &weights, q));
            // Quantile/ECDF consistency, up to the rounding of the final sum.
            prop_assert!(f.cdf(z) >= q || (z == *f.values().last().unwrap()));
        }
    }
}
