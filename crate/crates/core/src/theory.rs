//! Numerical verification of the two guarantees behind the test: the
//! covariance-driven lower bound on population dissociation, and the decay
//! of the label-permutation statistic with sample size.
//!
//! These checks validate the method in an idealized setting (interval
//! partitions of a one-dimensional score, simple random relabelings); they
//! are exercised by the test suite and the `oracle` CLI subcommand rather
//! than being part of the pipeline itself.

use std::f64::consts::{PI, SQRT_2};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{sample_gaussian, CovModel, SamplingStrategy};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::simulation::{generate_dgp, DgpKind, DgpSpec};
use crate::teststat::{dissociation, make_split, FeatureSplit, SplitMode};

/// A partition of the real line into K consecutive intervals, cut at
/// strictly increasing finite breakpoints. Interval 0 is unbounded below,
/// interval K-1 unbounded above; each finite breakpoint belongs to the
/// interval on its left.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalPartition {
    breakpoints: Vec<f64>,
}

impl IntervalPartition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidParameter(
                "an interval partition needs at least one breakpoint (K >= 2)".into(),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "breakpoints must be finite".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { breakpoints })
    }

    pub fn k(&self) -> usize {
        self.breakpoints.len() + 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Index of the interval containing `f`.
    pub fn interval_index(&self, f: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < f)
    }

    /// Bounds of interval `k`, with infinite outer ends.
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 {
            f64::NEG_INFINITY
        } else {
            self.breakpoints[k - 1]
        };
        let hi = if k == self.breakpoints.len() {
            f64::INFINITY
        } else {
            self.breakpoints[k]
        };
        (lo, hi)
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * (1.0 + libm::erf(x / SQRT_2))
}

/// Mean of a N(0, sigma^2) variable conditioned on the interval
/// (lower, upper], in closed form.
pub fn truncated_normal_mean(sigma: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale {sigma} must be positive and finite"
        )));
    }
    if !(lower < upper) {
        return Err(Error::InvalidParameter(format!(
            "empty interval ({lower}, {upper}]"
        )));
    }
    let a = lower / sigma;
    let b = upper / sigma;
    let mass = std_normal_cdf(b) - std_normal_cdf(a);
    if !(mass > 0.0) {
        return Err(Error::Precision(format!(
            "interval ({lower}, {upper}] carries no probability mass at scale {sigma}"
        )));
    }
    Ok(sigma * (std_normal_pdf(a) - std_normal_pdf(b)) / mass)
}

/// Monte Carlo estimate of the population dissociation over an interval
/// partition of the leading-eigenvector score, next to its closed-form
/// lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    /// Pooled Monte Carlo estimate of the population dissociation.
    pub estimate: f64,
    /// Batch-means standard error of the estimate (20 batches).
    pub standard_error: f64,
    /// max(|mean block-A loading|, |mean block-B loading|) times the spread
    /// between the extreme intervals' conditional score means.
    pub bound: f64,
    pub samples: usize,
    /// Conditional block-A means per interval, from the pooled run.
    pub interval_means_a: Vec<f64>,
    pub interval_means_b: Vec<f64>,
}

const MC_BATCHES: usize = 20;

/// Estimates the population dissociation of X ~ N(0, Sigma) when points
/// are grouped by which interval their leading-eigenvector score falls in,
/// and compares it against the closed-form lower bound driven by the
/// leading eigenpair.
///
/// Requires a simple positive leading eigenvalue. Standard errors come
/// from 20 equal batches; an interval that receives no samples in some
/// batch aborts with a precision error.
pub fn population_dissociation_mc<R: Rng>(
    sigma: &CovModel,
    partition: &IntervalPartition,
    split: &FeatureSplit,
    samples: usize,
    rng: &mut R,
) -> Result<BoundCheck> {
    let p = sigma.dim();
    if split.block_a.is_empty() || split.block_b.is_empty() {
        return Err(Error::InvalidParameter(
            "both feature blocks must be nonempty".into(),
        ));
    }
    if split
        .block_a
        .iter()
        .chain(&split.block_b)
        .any(|&j| j >= p)
    {
        return Err(Error::InvalidParameter(format!(
            "split references a feature index >= {p}"
        )));
    }
    if samples < 2 * MC_BATCHES {
        return Err(Error::InvalidParameter(format!(
            "need at least {} samples for batch-means errors",
            2 * MC_BATCHES
        )));
    }
    let l1 = sigma.eigenvalues()[0];
    let l2 = if p > 1 { sigma.eigenvalues()[1] } else { 0.0 };
    if !(l1 > 0.0) || l1 - l2 <= 1e-8 * l1 {
        return Err(Error::DegenerateCovariance(format!(
            "leading eigenvalue must be positive and simple (got {l1:.6e}, runner-up {l2:.6e})"
        )));
    }
    let u1: Vec<f64> = (0..p).map(|j| sigma.eigenvectors()[(j, 0)]).collect();

    let k = partition.k();
    let mut pooled_sums = vec![vec![0.0f64; p]; k];
    let mut pooled_counts = vec![0usize; k];
    let mut batch_estimates = Vec::with_capacity(MC_BATCHES);
    let base = samples / MC_BATCHES;
    let extra = samples % MC_BATCHES;
    for batch in 0..MC_BATCHES {
        let nb = base + usize::from(batch < extra);
        let x = sample_gaussian(sigma, nb, SamplingStrategy::ReducedRank, rng)?;
        let mut sums = vec![vec![0.0f64; p]; k];
        let mut counts = vec![0usize; k];
        for i in 0..nb {
            let f: f64 = (0..p).map(|j| u1[j] * x.values()[(i, j)]).sum();
            let cell = partition.interval_index(f);
            counts[cell] += 1;
            for j in 0..p {
                sums[cell][j] += x.values()[(i, j)];
            }
        }
        let (d_batch, _, _) = interval_dissociation(&sums, &counts, split, samples)?;
        batch_estimates.push(d_batch);
        for c in 0..k {
            pooled_counts[c] += counts[c];
            for j in 0..p {
                pooled_sums[c][j] += sums[c][j];
            }
        }
    }

    let (estimate, interval_means_a, interval_means_b) =
        interval_dissociation(&pooled_sums, &pooled_counts, split, samples)?;
    let batch_mean = batch_estimates.iter().sum::<f64>() / MC_BATCHES as f64;
    let batch_var = batch_estimates
        .iter()
        .map(|d| (d - batch_mean).powi(2))
        .sum::<f64>()
        / (MC_BATCHES - 1) as f64;
    let standard_error = (batch_var / MC_BATCHES as f64).sqrt();

    let mean_loading = |block: &[usize]| -> f64 {
        block.iter().map(|&j| u1[j]).sum::<f64>() / block.len() as f64
    };
    let load = mean_loading(&split.block_a)
        .abs()
        .max(mean_loading(&split.block_b).abs());
    let sd_f = l1.sqrt();
    let (lo, hi) = partition.bounds(0);
    let e_min = truncated_normal_mean(sd_f, lo, hi)?;
    let (lo, hi) = partition.bounds(k - 1);
    let e_max = truncated_normal_mean(sd_f, lo, hi)?;
    let bound = load * (e_max - e_min).abs();

    Ok(BoundCheck {
        estimate,
        standard_error,
        bound,
        samples,
        interval_means_a,
        interval_means_b,
    })
}

/// Dissociation over interval-conditional block means: the larger of the
/// two blocks' mean ranges across intervals.
fn interval_dissociation(
    sums: &[Vec<f64>],
    counts: &[usize],
    split: &FeatureSplit,
    samples: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let k = counts.len();
    let mut means_a = Vec::with_capacity(k);
    let mut means_b = Vec::with_capacity(k);
    for c in 0..k {
        if counts[c] == 0 {
            return Err(Error::Precision(format!(
                "interval {c} received no Monte Carlo samples ({samples} total); increase the sample count"
            )));
        }
        let block_mean = |block: &[usize]| -> f64 {
            block.iter().map(|&j| sums[c][j] / counts[c] as f64).sum::<f64>()
                / block.len() as f64
        };
        means_a.push(block_mean(&split.block_a));
        means_b.push(block_mean(&split.block_b));
    }
    let range = |m: &[f64]| -> f64 {
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    Ok((range(&means_a).max(range(&means_b)), means_a, means_b))
}

/// Community sizes from target fractions by the largest-remainder rule:
/// floor each pi_k * n, then hand leftover points to the largest
/// fractional parts (ties to the lowest index).
pub fn largest_remainder_sizes(n: usize, pis: &[f64]) -> Result<Vec<usize>> {
    if pis.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two community fractions".into(),
        ));
    }
    if pis.iter().any(|&pi| !pi.is_finite() || pi <= 0.0 || pi >= 1.0) {
        return Err(Error::InvalidParameter(
            "community fractions must lie in (0, 1)".into(),
        ));
    }
    let total: f64 = pis.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "community fractions sum to {total}, not 1"
        )));
    }
    let mut sizes: Vec<usize> = pis
        .iter()
        .map(|&pi| (pi * n as f64).floor() as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..pis.len()).collect();
    order.sort_by(|&a, &b| {
        let frac = |i: usize| pis[i] * n as f64 - (pis[i] * n as f64).floor();
        frac(b).total_cmp(&frac(a)).then(a.cmp(&b))
    });
    for i in 0..n.saturating_sub(assigned) {
        sizes[order[i % order.len()]] += 1;
    }
    Ok(sizes)
}

/// Median permuted dissociation per sample size, with the least-squares
/// slope of log median against log n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCheck {
    pub n_grid: Vec<usize>,
    pub medians: Vec<f64>,
    pub slope: f64,
}

/// Measures how fast the label-permutation dissociation shrinks as n
/// grows: for each n, draws a dataset, relabels points uniformly into
/// communities with the given size fractions, and records the median D
/// over `n_permutations` relabelings. Grid points run in parallel, each
/// on a seed derived from (base_seed, index).
pub fn permutation_decay_check(
    n_grid: &[usize],
    pis: &[f64],
    kind: DgpKind,
    p: usize,
    n_permutations: usize,
    base_seed: u64,
) -> Result<DecayCheck> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "need at least two strictly increasing sample sizes".into(),
        ));
    }
    if n_permutations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one permutation per grid point".into(),
        ));
    }
    largest_remainder_sizes(n_grid[0], pis)?;

    let medians: Vec<f64> = n_grid
        .par_iter()
        .enumerate()
        .map(|(i, &n)| -> Result<f64> {
            let sizes = largest_remainder_sizes(n, pis)?;
            if sizes.iter().any(|&s| s == 0) {
                return Err(Error::InvalidParameter(format!(
                    "n = {n} leaves a community empty under the given fractions"
                )));
            }
            let mut rng = stream_rng(derive_seed(base_seed, i as u64), 0);
            let spec = DgpSpec {
                kind,
                n,
                p,
                standardize: None,
            };
            let x = generate_dgp(&spec, &mut rng)?;
            let split = make_split(p, SplitMode::OddEven)?;
            let mut labels: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
                .collect();
            let mut ds = Vec::with_capacity(n_permutations);
            for _ in 0..n_permutations {
                labels.shuffle(&mut rng);
                let assignment: Vec<Option<usize>> =
                    labels.iter().map(|&l| Some(l)).collect();
                ds.push(dissociation(&x, &assignment, &split, false)?.d);
            }
            Ok(median(ds))
        })
        .collect::<Result<_>>()?;

    if medians.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Precision(
            "a median permuted dissociation is zero; cannot fit a log-log slope".into(),
        ));
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|&m| m.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);

    Ok(DecayCheck {
        n_grid: n_grid.to_vec(),
        medians,
        slope,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    sxy / sxx
}

/// Empirical versus closed-form variance of one relabeled community's
/// mean: draws `draws` simple random samples of `community_size` from a
/// fixed standard-normal population of size n and compares the variance
/// of the sample means against (1/community_size - 1/n) * S^2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitePopulationCheck {
    pub empirical_variance: f64,
    pub formula_variance: f64,
    pub ratio: f64,
}

pub fn finite_population_variance_check(
    n: usize,
    community_size: usize,
    draws: usize,
    seed: u64,
) -> Result<FinitePopulationCheck> {
    if community_size < 2 || community_size >= n {
        return Err(Error::InvalidParameter(format!(
            "community size {community_size} must lie in [2, n)"
        )));
    }
    if draws < 2 {
        return Err(Error::InvalidParameter("need at least two draws".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let s2 = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / (n - 1) as f64;

    let mut idx: Vec<usize> = (0..n).collect();
    let mut means = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (chosen, _) = idx.partial_shuffle(&mut rng, community_size);
        let m = chosen.iter().map(|&i| y[i]).sum::<f64>() / community_size as f64;
        means.push(m);
    }
    let mbar = means.iter().sum::<f64>() / draws as f64;
    let empirical_variance =
        means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let formula_variance = (1.0 / community_size as f64 - 1.0 / n as f64) * s2;
    Ok(FinitePopulationCheck {
        empirical_variance,
        formula_variance,
        ratio: empirical_variance / formula_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn partition_validation_and_indexing() {
        assert!(IntervalPartition::new(vec![]).is_err());
        assert!(IntervalPartition::new(vec![0.0, 0.0]).is_err());
        assert!(IntervalPartition::new(vec![1.0, -1.0]).is_err());
        assert!(IntervalPartition::new(vec![0.0, f64::NAN]).is_err());

        let part = IntervalPartition::new(vec![-1.0, 2.0]).unwrap();
        assert_eq!(part.k(), 3);
        assert_eq!(part.interval_index(-5.0), 0);
        // A breakpoint belongs to the interval on its left.
        assert_eq!(part.interval_index(-1.0), 0);
        assert_eq!(part.interval_index(0.0), 1);
        assert_eq!(part.interval_index(2.0), 1);
        assert_eq!(part.interval_index(2.0001), 2);
        assert_eq!(part.bounds(0), (f64::NEG_INFINITY, -1.0));
        assert_eq!(part.bounds(2), (2.0, f64::INFINITY));
    }

    #[test]
    fn truncated_normal_mean_closed_forms() {
        let half = truncated_normal_mean(2.0, 0.0, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(half, 2.0 * (2.0 / PI).sqrt(), epsilon = 1e-14);
        let neg = truncated_normal_mean(2.0, f64::NEG_INFINITY, 0.0).unwrap();
        assert_abs_diff_eq!(neg, -half, epsilon = 1e-14);
        let sym = truncated_normal_mean(1.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(sym, 0.0, epsilon = 1e-14);
        assert!(truncated_normal_mean(1.0, 40.0, 41.0).is_err());
        assert!(truncated_normal_mean(0.0, 0.0, 1.0).is_err());
        assert!(truncated_normal_mean(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn truncated_means_increase_across_ordered_intervals() {
        let part = IntervalPartition::new(vec![-1.3, -0.2, 0.4, 2.0]).unwrap();
        let sigma = 1.7;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..part.k() {
            let (lo, hi) = part.bounds(k);
            let m = truncated_normal_mean(sigma, lo, hi).unwrap();
            assert!(m > prev, "interval {k}: mean {m} <= previous {prev}");
            prev = m;
        }
    }

    fn diag_model(entries: &[f64]) -> CovModel {
        let p = entries.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        CovModel::from_matrix(m).unwrap()
    }

    #[test]
    fn split_at_zero_bound_matches_the_half_normal_value() {
        let sigma = diag_model(&[4.0, 1.0]);
        let part = IntervalPartition::new(vec![0.0]).unwrap();
        let split = make_split(2, SplitMode::OddEven).unwrap();
        let check = population_dissociation_mc(
            &sigma,
            &part,
            &split,
            400_000,
            &mut stream_rng(21, 0),
        )
        .unwrap();
        let expected = 2.0 * (8.0 / PI).sqrt();
        assert_abs_diff_eq!(check.bound, expected, epsilon = 1e-12);
        assert!(
            check.estimate >= check.bound - 3.0 * check.standard_error,
            "estimate {} under bound {} - 3*{}",
            check.estimate,
            check.bound,
            check.standard_error
        );
        // For a diagonal covariance the estimate sits at the bound itself.
        assert_abs_diff_eq!(check.estimate, expected, epsilon = 0.05);
        assert!(check.standard_error > 0.0 && check.standard_error < 0.05);
        assert_eq!(check.interval_means_a.len(), 2);
    }

    #[test]
    fn orthogonal_loadings_give_a_zero_bound() {
        // Sigma = I + 4*v*v' with v = (0.5, -0.5, 0.5, -0.5): the leading
        // eigenvector alternates sign, so both block-average loadings of
        // the {0,1}/{2,3} split vanish.
        let v = [0.5, -0.5, 0.5, -0.5];
        let mut m = DMatrix::identity(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] += 4.0 * v[i] * v[j];
            }
        }
        let sigma = CovModel::from_matrix(m).unwrap();
        let split = FeatureSplit {
            block_a: vec![0, 1],
            block_b: vec![2, 3],
            origin: SplitMode::OddEven,
        };
        let part = IntervalPartition::new(vec![0.0]).unwrap();
        let check =
            population_dissociation_mc(&sigma, &part, &split, 50_000, &mut stream_rng(22, 0))
                .unwrap();
        assert!(check.bound < 1e-8, "bound {} should vanish", check.bound);
        assert!(check.estimate >= check.bound - 3.0 * check.standard_error);
    }

    #[test]
    fn finer_partitions_do_not_shrink_the_estimate() {
        let sigma = diag_model(&[4.0, 1.0]);
        let split = make_split(2, SplitMode::OddEven).unwrap();
        let coarse = IntervalPartition::new(vec![0.0]).unwrap();
        let fine = IntervalPartition::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let a =
            population_dissociation_mc(&sigma, &coarse, &split, 200_000, &mut stream_rng(23, 0))
                .unwrap();
        let b =
            population_dissociation_mc(&sigma, &fine, &split, 200_000, &mut stream_rng(24, 0))
                .unwrap();
        assert!(
            b.estimate >= a.estimate - 3.0 * (a.standard_error + b.standard_error),
            "refining dropped the estimate: {} vs {}",
            b.estimate,
            a.estimate
        );
        assert!(b.bound > a.bound);
    }

    #[test]
    fn repeated_leading_eigenvalue_is_rejected() {
        let sigma = diag_model(&[1.0, 1.0]);
        let part = IntervalPartition::new(vec![0.0]).unwrap();
        let split = make_split(2, SplitMode::OddEven).unwrap();
        let err =
            population_dissociation_mc(&sigma, &part, &split, 1000, &mut stream_rng(25, 0))
                .unwrap_err();
        assert!(matches!(err, Error::DegenerateCovariance(_)));
    }

    #[test]
    fn empty_interval_asks_for_more_samples() {
        let sigma = diag_model(&[4.0, 1.0]);
        // The middle interval (-50, -49] is far outside the score range.
        let part = IntervalPartition::new(vec![-50.0, -49.0]).unwrap();
        let split = make_split(2, SplitMode::OddEven).unwrap();
        let err =
            population_dissociation_mc(&sigma, &part, &split, 1000, &mut stream_rng(26, 0))
                .unwrap_err();
        match err {
            Error::Precision(msg) => assert!(msg.contains("sample")),
            other => panic!("expected a precision error, got {other}"),
        }
    }

    #[test]
    fn largest_remainder_sizes_match_hand_counts() {
        assert_eq!(
            largest_remainder_sizes(10, &[0.5, 0.3, 0.2]).unwrap(),
            vec![5, 3, 2]
        );
        assert_eq!(
            largest_remainder_sizes(7, &[0.5, 0.3, 0.2]).unwrap(),
            vec![4, 2, 1]
        );
        assert_eq!(
            largest_remainder_sizes(6400, &[0.5, 0.3, 0.2]).unwrap(),
            vec![3200, 1920, 1280]
        );
        let sizes = largest_remainder_sizes(401, &[0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(sizes.iter().sum::<usize>(), 401);
        assert_eq!(sizes, vec![101, 100, 100, 100]);
        assert!(largest_remainder_sizes(10, &[0.5, 0.6]).is_err());
        assert!(largest_remainder_sizes(10, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn permuted_dissociation_shrinks_with_n() {
        let check = permutation_decay_check(
            &[200, 800],
            &[0.5, 0.3, 0.2],
            DgpKind::Spherical,
            4,
            60,
            31,
        )
        .unwrap();
        assert!(check.medians[1] < check.medians[0]);
        assert!(
            check.slope < -0.2,
            "slope {} not clearly negative",
            check.slope
        );
        let again = permutation_decay_check(
            &[200, 800],
            &[0.5, 0.3, 0.2],
            DgpKind::Spherical,
            4,
            60,
            31,
        )
        .unwrap();
        assert_eq!(check, again);
    }

    #[test]
    fn constant_data_has_exactly_zero_permuted_dissociation() {
        use crate::data::DataMatrix;
        let x = DataMatrix::from_values(DMatrix::from_element(6, 4, 2.5)).unwrap();
        let split = make_split(4, SplitMode::OddEven).unwrap();
        let mut labels = vec![0, 0, 0, 1, 1, 1];
        let mut rng = stream_rng(32, 0);
        for _ in 0..10 {
            labels.shuffle(&mut rng);
            let assignment: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
            let d = dissociation(&x, &assignment, &split, false).unwrap();
            assert_eq!(d.d, 0.0);
        }
    }

    #[test]
    fn finite_population_variance_matches_the_formula() {
        let check = finite_population_variance_check(2000, 300, 4000, 33).unwrap();
        assert!(
            (0.9..=1.1).contains(&check.ratio),
            "ratio {} outside 10%",
            check.ratio
        );
        assert!(check.formula_variance > 0.0);
    }

    #[test]
    fn regression_of_features_on_the_score_recovers_the_loadings() {
        // Two-block covariance, within-rho 0.5 on {0,1} and {2,3}.
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.5;
        m[(1, 0)] = 0.5;
        m[(2, 3)] = 0.5;
        m[(3, 2)] = 0.5;
        // Break the eigenvalue tie between the two blocks.
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] *= 1.5;
            }
        }
        let sigma = CovModel::from_matrix(m).unwrap();
        let n = 50_000;
        let x = sample_gaussian(
            &sigma,
            n,
            SamplingStrategy::ReducedRank,
            &mut stream_rng(34, 0),
        )
        .unwrap();
        let u1: Vec<f64> = (0..4).map(|j| sigma.eigenvectors()[(j, 0)]).collect();
        let f: Vec<f64> = (0..n)
            .map(|i| (0..4).map(|j| u1[j] * x.values()[(i, j)]).sum())
            .collect();
        let fbar = f.iter().sum::<f64>() / n as f64;
        let sxx: f64 = f.iter().map(|v| (v - fbar).powi(2)).sum();
        for j in 0..4 {
            let xbar = x.values().column(j).sum() / n as f64;
            let sxy: f64 = (0..n)
                .map(|i| (f[i] - fbar) * (x.values()[(i, j)] - xbar))
                .sum();
            let slope = sxy / sxx;
            let mse: f64 = (0..n)
                .map(|i| {
                    let fit = xbar + slope * (f[i] - fbar);
                    (x.values()[(i, j)] - fit).powi(2)
                })
                .sum::<f64>()
                / (n - 2) as f64;
            let se = (mse / sxx).sqrt();
            assert!(
                (slope - u1[j]).abs() <= 3.0 * se,
                "feature {j}: slope {slope} vs loading {} (se {se})",
                u1[j]
            );
        }
    }
}
