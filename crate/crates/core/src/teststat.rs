//! Dissociation statistic, feature splits, permutation baseline, z-score,
//! and Monte Carlo p-value.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::CommunityResult;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// How a feature split was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitMode {
    OddEven,
    Random { seed: u64 },
}

/// A balanced partition of the feature indices into two blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSplit {
    pub block_a: Vec<usize>,
    pub block_b: Vec<usize>,
    pub origin: SplitMode,
}

/// Splits features 0..p into two disjoint blocks whose sizes differ by at
/// most one: even/odd indices, or a seeded uniform balanced split.
pub fn make_split(p: usize, mode: SplitMode) -> Result<FeatureSplit> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 features to split, got {p}"
        )));
    }
    let (block_a, block_b) = match mode {
        SplitMode::OddEven => (
            (0..p).step_by(2).collect(),
            (1..p).step_by(2).collect(),
        ),
        SplitMode::Random { seed } => {
            let mut idx: Vec<usize> = (0..p).collect();
            idx.shuffle(&mut stream_rng(seed, 0));
            let half = p.div_ceil(2);
            let mut a: Vec<usize> = idx[..half].to_vec();
            let mut b: Vec<usize> = idx[half..].to_vec();
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        }
    };
    Ok(FeatureSplit {
        block_a,
        block_b,
        origin: mode,
    })
}

/// Absolute block-mean gaps for one community pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDelta {
    pub pair: (usize, usize),
    pub delta_a: f64,
    pub delta_b: f64,
}

/// Dissociation of a point-to-community assignment.
///
/// `d` maximizes the absolute block-mean gap over all pairs of nonempty
/// communities; `d_excl_singletons` restricts to communities with at least
/// two points. `d_max`, `per_pair_values`, and `argmax_pair` describe the
/// community set the call focused on (all or non-singleton).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissociationResult {
    pub d: f64,
    pub d_excl_singletons: f64,
    /// Largest absolute single-feature mean gap over the focus pairs.
    pub d_max: f64,
    pub per_pair_values: Vec<PairDelta>,
    pub argmax_pair: Option<(usize, usize)>,
}

fn block_gap_max(mu_a: &[f64], mu_b: &[f64], eligible: &[usize]) -> (f64, Option<(usize, usize)>) {
    let mut best = 0.0f64;
    let mut arg = None;
    for (i, &k) in eligible.iter().enumerate() {
        for &l in &eligible[i + 1..] {
            let gap = (mu_a[k] - mu_a[l]).abs().max((mu_b[k] - mu_b[l]).abs());
            if arg.is_none() || gap > best {
                best = gap;
                arg = Some((k, l));
            }
        }
    }
    if eligible.len() < 2 {
        (0.0, None)
    } else {
        (best, arg)
    }
}

/// Community block-mean dissociation: each community's feature values are
/// averaged over members, then over each block of the split; the statistic
/// is the largest absolute difference between two communities' block
/// means. Fewer than two eligible communities give zero.
pub fn dissociation(
    x: &DataMatrix,
    assignment: &[Option<usize>],
    split: &FeatureSplit,
    exclude_singletons: bool,
) -> Result<DissociationResult> {
    let (n, p) = (x.n(), x.p());
    if assignment.len() != n {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} points, data has {n}",
            assignment.len()
        )));
    }
    if split.block_a.iter().chain(&split.block_b).any(|&j| j >= p) {
        return Err(Error::InvalidParameter(
            "split references a feature index out of range".into(),
        ));
    }

    let k_total = assignment
        .iter()
        .filter_map(|a| *a)
        .max()
        .map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k_total];
    let mut sums = vec![vec![0.0f64; p]; k_total];
    for (i, a) in assignment.iter().enumerate() {
        if let Some(c) = *a {
            counts[c] += 1;
            for j in 0..p {
                sums[c][j] += x.values()[(i, j)];
            }
        }
    }

    let mu: Vec<Vec<f64>> = (0..k_total)
        .map(|c| {
            if counts[c] == 0 {
                vec![f64::NAN; p]
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            }
        })
        .collect();
    let block_mean = |c: usize, block: &[usize]| -> f64 {
        block.iter().map(|&j| mu[c][j]).sum::<f64>() / block.len() as f64
    };
    let mu_a: Vec<f64> = (0..k_total).map(|c| block_mean(c, &split.block_a)).collect();
    let mu_b: Vec<f64> = (0..k_total).map(|c| block_mean(c, &split.block_b)).collect();

    let all: Vec<usize> = (0..k_total).filter(|&c| counts[c] > 0).collect();
    let non_singleton: Vec<usize> = (0..k_total).filter(|&c| counts[c] >= 2).collect();
    let (d, _) = block_gap_max(&mu_a, &mu_b, &all);
    let (d_excl, _) = block_gap_max(&mu_a, &mu_b, &non_singleton);
    let focus = if exclude_singletons { &non_singleton } else { &all };
    let (_, argmax_pair) = block_gap_max(&mu_a, &mu_b, focus);

    let mut per_pair_values = Vec::new();
    let mut d_max = 0.0f64;
    for (i, &k) in focus.iter().enumerate() {
        for &l in &focus[i + 1..] {
            per_pair_values.push(PairDelta {
                pair: (k, l),
                delta_a: (mu_a[k] - mu_a[l]).abs(),
                delta_b: (mu_b[k] - mu_b[l]).abs(),
            });
            for j in 0..p {
                d_max = d_max.max((mu[k][j] - mu[l][j]).abs());
            }
        }
    }

    Ok(DissociationResult {
        d,
        d_excl_singletons: d_excl,
        d_max,
        per_pair_values,
        argmax_pair,
    })
}

/// Label-permutation baseline for the dissociation statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationNull {
    pub z: f64,
    /// Observed statistic recomputed through the same per-point block
    /// averages the permuted samples use.
    pub d_obs: f64,
    pub mean: f64,
    pub sd: f64,
    pub samples: Vec<f64>,
}

/// Dissociation from per-point block averages and a flat assignment of
/// pooled points to consecutive blocks of the given sizes.
fn dissociation_from_block_means(
    y_a: &[f64],
    y_b: &[f64],
    pool: &[usize],
    sizes: &[usize],
    min_size: usize,
) -> f64 {
    let mut mu_a = Vec::with_capacity(sizes.len());
    let mut mu_b = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &s in sizes {
        if s >= min_size.max(1) {
            let members = &pool[offset..offset + s];
            let sa: f64 = members.iter().map(|&i| y_a[i]).sum();
            let sb: f64 = members.iter().map(|&i| y_b[i]).sum();
            mu_a.push(sa / s as f64);
            mu_b.push(sb / s as f64);
        }
        offset += s;
    }
    let mut best = 0.0f64;
    for k in 0..mu_a.len() {
        for l in (k + 1)..mu_a.len() {
            best = best
                .max((mu_a[k] - mu_a[l]).abs())
                .max((mu_b[k] - mu_b[l]).abs());
        }
    }
    best
}

/// Size-preserving random reassignment baseline: assigned points are
/// pooled, shuffled, and dealt back into communities of the observed
/// sizes; the dissociation statistic is recomputed each time. Returns the
/// standardized observed statistic and the permuted samples.
pub fn permutation_null<R: Rng>(
    x: &DataMatrix,
    result: &CommunityResult,
    split: &FeatureSplit,
    exclude_singletons: bool,
    n_perm: usize,
    rng: &mut R,
) -> Result<PermutationNull> {
    if n_perm < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 permutations, got {n_perm}"
        )));
    }
    if result.n_communities < 2 {
        return Err(Error::InvalidParameter(
            "permutation baseline needs at least 2 communities".into(),
        ));
    }
    if result.point_community.len() != x.n() {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} points, data has {}",
            result.point_community.len(),
            x.n()
        )));
    }
    let assigned: Vec<usize> = result
        .point_community
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|_| i))
        .collect();
    if assigned.len() < result.n_communities {
        return Err(Error::InvalidParameter(format!(
            "{} assigned points cannot fill {} communities",
            assigned.len(),
            result.n_communities
        )));
    }

    let y_a: Vec<f64> = (0..x.n())
        .map(|i| {
            split.block_a.iter().map(|&j| x.values()[(i, j)]).sum::<f64>()
                / split.block_a.len() as f64
        })
        .collect();
    let y_b: Vec<f64> = (0..x.n())
        .map(|i| {
            split.block_b.iter().map(|&j| x.values()[(i, j)]).sum::<f64>()
                / split.block_b.len() as f64
        })
        .collect();
    let min_size = if exclude_singletons { 2 } else { 1 };

    // Observed statistic through the identical summation path: community
    // slots in size order, members in point order.
    let mut observed_pool: Vec<usize> = Vec::with_capacity(assigned.len());
    for c in 0..result.n_communities {
        observed_pool.extend(
            result
                .point_community
                .iter()
                .enumerate()
                .filter(|(_, pc)| **pc == Some(c))
                .map(|(i, _)| i),
        );
    }
    let d_obs =
        dissociation_from_block_means(&y_a, &y_b, &observed_pool, &result.sizes, min_size);

    let mut pool = assigned;
    let mut samples = Vec::with_capacity(n_perm);
    for _ in 0..n_perm {
        pool.shuffle(rng);
        samples.push(dissociation_from_block_means(
            &y_a,
            &y_b,
            &pool,
            &result.sizes,
            min_size,
        ));
    }

    let mean = samples.iter().sum::<f64>() / n_perm as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n_perm - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateNull(
            "permuted dissociation samples have zero standard deviation".into(),
        ));
    }
    Ok(PermutationNull {
        z: (d_obs - mean) / sd,
        d_obs,
        mean,
        sd,
        samples,
    })
}

/// Standardizes an observed value against null samples (sample sd).
pub fn zscore(d_obs: f64, null_samples: &[f64]) -> Result<f64> {
    if null_samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 null samples, got {}",
            null_samples.len()
        )));
    }
    let n = null_samples.len() as f64;
    let mean = null_samples.iter().sum::<f64>() / n;
    let var = null_samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateNull(
            "null samples have zero standard deviation".into(),
        ));
    }
    Ok((d_obs - mean) / sd)
}

/// Add-one Monte Carlo p-value: (1 + #{samples >= observed}) / (1 + B).
/// Never exactly zero.
pub fn mc_pvalue(d_obs: f64, null_samples: &[f64]) -> Result<f64> {
    if null_samples.is_empty() {
        return Err(Error::InvalidParameter(
            "Monte Carlo p-value needs at least one null sample".into(),
        ));
    }
    let count = null_samples.iter().filter(|&&s| s >= d_obs).count();
    Ok((1 + count) as f64 / (1 + null_samples.len()) as f64)
}
