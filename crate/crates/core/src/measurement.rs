//! Measurement density, Hungarian-aligned measurement similarity, dropout
//! divergence, and the repeated-subsample protocol with its original-vs-
//! original reference block.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, Assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::ingest::DatasetPair;
use crate::marginal::{ProfileMetric, ProfileSeries};
use crate::model::{build_measurement_matrix, dropout_points, DropoutVector, MeasurementMatrix, TimeGrid};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_SUBSAMPLE: usize = 2000;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Share of all measurements falling on each grid point.
pub fn measurement_density(matrix: &MeasurementMatrix) -> Result<ProfileSeries> {
    let total = matrix.count_ones();
    if total == 0 {
        return Err(Error::NoMeasurements("<measurement matrix>".into()));
    }
    let values = matrix
        .column_sums()
        .into_iter()
        .map(|c| vec![c as f64 / total as f64])
        .collect();
    Ok(ProfileSeries {
        metric: ProfileMetric::Density,
        bandwidth: None,
        grid: matrix.grid().points.clone(),
        columns: vec!["density".into()],
        values,
        ess: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityOutcome {
    pub similarity: f64,
    pub frobenius: f64,
    /// Disagreeing bits after alignment.
    pub mismatches: u64,
    /// Original row -> synthetic row.
    pub alignment: Assignment,
}

/// Aligns synthetic rows to original rows by minimum total squared
/// Euclidean (for binary rows: Hamming) distance, then scores the bitwise
/// disagreement.
pub fn measurement_similarity(
    original: &MeasurementMatrix,
    synthetic: &MeasurementMatrix,
) -> Result<SimilarityOutcome> {
    if original.n_rows() != synthetic.n_rows() || original.n_cols() != synthetic.n_cols() {
        return Err(Error::DimensionMismatch {
            original_rows: original.n_rows(),
            original_cols: original.n_cols(),
            synthetic_rows: synthetic.n_rows(),
            synthetic_cols: synthetic.n_cols(),
        });
    }
    let n = original.n_rows();
    let cells = (n * original.n_cols()) as f64;
    if n == 0 || cells == 0.0 {
        return Err(Error::NoMeasurements("<measurement matrix>".into()));
    }
    let mut costs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            costs.push(f64::from(original.row_distance(i, synthetic, j)));
        }
    }
    let cost = CostMatrix::new(n, costs)?;
    let alignment = solve_assignment(&cost);
    let mismatches: u64 = alignment
        .permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| u64::from(original.row_distance(i, synthetic, j)))
        .sum();
    Ok(SimilarityOutcome {
        similarity: 1.0 - mismatches as f64 / cells,
        frobenius: (mismatches as f64).sqrt(),
        mismatches,
        alignment,
    })
}

/// Empirical distribution of dropout points over the grid (subjects without
/// measurements are left out).
pub fn dropout_distribution(dropout: &DropoutVector) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; dropout.grid_len];
    let mut total = 0.0;
    for d in dropout.observed() {
        counts[d] += 1.0;
        total += 1.0;
    }
    if total == 0.0 {
        return Err(Error::NoMeasurements("<dropout points>".into()));
    }
    Ok(counts.into_iter().map(|c| c / total).collect())
}

/// `KL(P || Q)` with natural log after adding `epsilon` to every mass and
/// renormalizing both sides.
pub fn smoothed_kl(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Validation("distributions must share a non-empty support".into()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let smooth = |d: &[f64]| {
        let total: f64 = d.iter().map(|m| m + epsilon).sum();
        d.iter().map(|m| (m + epsilon) / total).collect::<Vec<f64>>()
    };
    let (p, q) = (smooth(p), smooth(q));
    let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    // Non-negative in exact arithmetic; clear rounding residue.
    Ok(kl.max(0.0))
}

pub fn dropout_divergence(original: &DropoutVector, synthetic: &DropoutVector, epsilon: f64) -> Result<f64> {
    if original.grid_len != synthetic.grid_len {
        return Err(Error::Validation("dropout vectors live on different grids".into()));
    }
    smoothed_kl(
        &dropout_distribution(original)?,
        &dropout_distribution(synthetic)?,
        epsilon,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; absent for a single iteration.
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd =
            (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolBlock {
    pub subsample_size: usize,
    pub similarity: Summary,
    pub frobenius: Summary,
    pub dropout_divergence: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub density_original: ProfileSeries,
    pub density_synthetic: ProfileSeries,
    pub comparison: ProtocolBlock,
    /// Same statistics between disjoint halves of the original roster.
    pub reference: Option<ProtocolBlock>,
    pub iterations: usize,
    pub seed: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSettings {
    pub subsample_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub epsilon: f64,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            subsample_size: DEFAULT_SUBSAMPLE,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

struct Scores {
    similarity: f64,
    frobenius: f64,
    divergence: f64,
}

fn score(
    a: &MeasurementMatrix,
    a_drop: &DropoutVector,
    a_rows: &[usize],
    b: &MeasurementMatrix,
    b_drop: &DropoutVector,
    b_rows: &[usize],
    epsilon: f64,
) -> Result<Scores> {
    let sim = measurement_similarity(&a.select_rows(a_rows), &b.select_rows(b_rows))?;
    let divergence = dropout_divergence(&a_drop.select(a_rows), &b_drop.select(b_rows), epsilon)?;
    Ok(Scores {
        similarity: sim.similarity,
        frobenius: sim.frobenius,
        divergence,
    })
}

fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

fn sorted_sample(rng: &mut ChaCha8Rng, from: usize, k: usize) -> Vec<usize> {
    let mut v = sample(rng, from, k).into_vec();
    v.sort_unstable();
    v
}

fn block(size: usize, scores: &[Scores]) -> ProtocolBlock {
    let pick = |f: fn(&Scores) -> f64| Summary::of(&scores.iter().map(f).collect::<Vec<_>>());
    ProtocolBlock {
        subsample_size: size,
        similarity: pick(|s| s.similarity),
        frobenius: pick(|s| s.frobenius),
        dropout_divergence: pick(|s| s.divergence),
    }
}

/// Repeated equal-size subsampling of original and synthetic rosters.
///
/// Each iteration draws its own RNG stream from the master seed, so results
/// do not depend on how iterations are scheduled.
pub fn subsample_protocol(
    pair: &DatasetPair,
    variable: &str,
    grid: &TimeGrid,
    settings: &ProtocolSettings,
) -> Result<MeasurementReport> {
    if settings.iterations == 0 || settings.subsample_size == 0 {
        return Err(Error::Config("subsample size and iterations must be positive".into()));
    }
    let orig = build_measurement_matrix(&pair.original, variable, grid)?;
    let synth = build_measurement_matrix(&pair.synthetic, variable, grid)?;
    let (orig_drop, synth_drop) = (dropout_points(&orig), dropout_points(&synth));
    let (n_orig, n_synth) = (orig.n_rows(), synth.n_rows());

    let size = settings.subsample_size.min(n_orig).min(n_synth);
    if size < settings.subsample_size {
        log::warn!(
            "`{variable}`: subsample size {} clamped to {size} (rosters: {n_orig} original, {n_synth} synthetic)",
            settings.subsample_size
        );
    }
    if size == 0 {
        return Err(Error::NoMeasurements(variable.to_string()));
    }
    let ref_size = settings.subsample_size.min(n_orig / 2);
    if ref_size == 0 {
        log::warn!("`{variable}`: fewer than two original subjects, no reference block");
    }

    let results: Vec<Result<(Scores, Option<Scores>)>> = (0..settings.iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = iteration_rng(settings.seed, it);
            let a = sorted_sample(&mut rng, n_orig, size);
            let b = sorted_sample(&mut rng, n_synth, size);
            let main = score(&orig, &orig_drop, &a, &synth, &synth_drop, &b, settings.epsilon)?;
            let reference = if ref_size > 0 {
                let mut roster: Vec<usize> = (0..n_orig).collect();
                roster.shuffle(&mut rng);
                let (left, right) = roster.split_at(n_orig / 2);
                let pick = |half: &[usize], rng: &mut ChaCha8Rng| {
                    let mut rows: Vec<usize> = sample(rng, half.len(), ref_size).into_iter().map(|k| half[k]).collect();
                    rows.sort_unstable();
                    rows
                };
                let l = pick(left, &mut rng);
                let r = pick(right, &mut rng);
                Some(score(&orig, &orig_drop, &l, &orig, &orig_drop, &r, settings.epsilon)?)
            } else {
                None
            };
            Ok((main, reference))
        })
        .collect();

    let mut main = Vec::with_capacity(settings.iterations);
    let mut reference = Vec::with_capacity(settings.iterations);
    for r in results {
        let (m, rf) = r?;
        main.push(m);
        reference.extend(rf);
    }
    Ok(MeasurementReport {
        density_original: measurement_density(&orig)?,
        density_synthetic: measurement_density(&synth)?,
        comparison: block(size, &main),
        reference: (!reference.is_empty()).then(|| block(ref_size, &reference)),
        iterations: settings.iterations,
        seed: settings.seed,
        epsilon: settings.epsilon,
    })
}

/// Reference statistics only: original-vs-original on disjoint halves.
pub fn reference_protocol(
    original: &crate::model::LongDataset,
    variable: &str,
    grid: &TimeGrid,
    settings: &ProtocolSettings,
) -> Result<ProtocolBlock> {
    if original.n_subjects() < 2 {
        return Err(Error::Validation(format!(
            "reference baseline for `{variable}` needs at least two subjects"
        )));
    }
    let pair = DatasetPair::self_pair(original);
    subsample_protocol(&pair, variable, grid, settings)?
        .reference
        .ok_or_else(|| Error::Validation("reference block unavailable".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// All permutations of `0..n` (Heap's algorithm).
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut a: Vec<usize> = (0..n).collect();
        let mut c = vec![0; n];
        out.push(a.clone());
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    a.swap(0, i);
                } else {
                    a.swap(c[i], i);
                }
                out.push(a.clone());
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        out
    }

    fn matrix(rows: &[&[u8]]) -> MeasurementMatrix {
        let cols = rows[0].len();
        let grid = TimeGrid::new(0.0, (cols - 1) as f64, 1.0).unwrap();
        let subjects = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        MeasurementMatrix::from_rows(subjects, grid, &rows).unwrap()
    }

    #[test]
    fn density_examples() {
        let d = measurement_density(&matrix(&[&[1, 1, 1], &[1, 1, 1]])).unwrap();
        assert!(d.values.iter().all(|r| r[0] == 1.0 / 3.0));
        let d = measurement_density(&matrix(&[&[0, 1, 0], &[0, 1, 0]])).unwrap();
        assert_eq!(d.column(0), vec![0.0, 1.0, 0.0]);
        let d = measurement_density(&matrix(&[&[1, 1, 0], &[1, 0, 0]])).unwrap();
        assert_eq!(d.column(0), vec![2.0 / 3.0, 1.0 / 3.0, 0.0]);
        assert!(measurement_density(&matrix(&[&[0, 0]])).is_err());
    }

    #[test]
    fn similarity_examples() {
        let a = matrix(&[&[1, 0, 1], &[0, 1, 1], &[0, 0, 1]]);
        let b = matrix(&[&[0, 0, 1], &[1, 0, 1], &[0, 1, 1]]);
        let s = measurement_similarity(&a, &b).unwrap();
        assert_eq!((s.similarity, s.frobenius), (1.0, 0.0));

        let s = measurement_similarity(&matrix(&[&[1, 1], &[1, 1]]), &matrix(&[&[0, 0], &[0, 0]])).unwrap();
        assert_eq!(s.similarity, 0.0);

        let a = matrix(&[&[1, 0], &[0, 1]]);
        let b = matrix(&[&[1, 1], &[0, 0]]);
        // Brute force over both permutations.
        let best = permutations(2)
            .iter()
            .map(|p| (0..2).map(|i| a.row_distance(i, &b, p[i])).sum::<u32>())
            .min()
            .unwrap();
        assert_eq!(best, 2);
        let s = measurement_similarity(&a, &b).unwrap();
        assert_eq!(s.similarity, 0.5);
        assert_abs_diff_eq!(s.frobenius, 2f64.sqrt(), epsilon = 1e-15);

        assert!(matches!(
            measurement_similarity(&a, &matrix(&[&[1, 1]])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(smoothed_kl(&[0.3, 0.7], &[0.3, 0.7], 1e-6).unwrap(), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(
            smoothed_kl(&[0.5, 0.5], &[0.25, 0.75], 1e-12).unwrap(),
            expected,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(expected, 0.1438, epsilon = 1e-4);

        // Synthetic mass where the original has none: finite, and growing as
        // epsilon shrinks.
        let p = [1.0, 0.0];
        let q = [0.0, 1.0];
        let coarse = smoothed_kl(&p, &q, 1e-3).unwrap();
        let fine = smoothed_kl(&p, &q, 1e-6).unwrap();
        assert!(coarse.is_finite() && fine.is_finite() && fine > coarse);
        assert!(smoothed_kl(&p, &q, 0.0).is_err());
    }

    #[test]
    fn divergence_from_dropout_vectors() {
        let p = DropoutVector {
            grid_len: 2,
            points: vec![Some(0), Some(1), None],
        };
        let q = DropoutVector {
            grid_len: 2,
            points: vec![Some(0), Some(1), Some(1), Some(1)],
        };
        let d = dropout_divergence(&p, &q, 1e-9).unwrap();
        assert_abs_diff_eq!(d, 0.1438, epsilon = 1e-3);
        assert_eq!(dropout_divergence(&p, &p, 1e-6).unwrap(), 0.0);
        let empty = DropoutVector {
            grid_len: 2,
            points: vec![None],
        };
        assert!(dropout_divergence(&p, &empty, 1e-6).is_err());
    }

    #[test]
    fn summary_sd_absent_for_single_value() {
        assert_eq!(Summary::of(&[0.5]).sd, None);
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.sd.unwrap(), 2f64.sqrt(), epsilon = 1e-15);
    }
}
