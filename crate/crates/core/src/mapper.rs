//! Mapper graph construction: cover, preimage clustering, nerve.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::data::DataMatrix;
use crate::distance::DistMatrix;
use crate::error::{Error, Result};

/// How cover intervals are placed along each filter dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverMode {
    /// Interval `i` of `N` spans the closed quantile band
    /// `[i/N, min(1, (i+g)/N)]` of the filter's empirical distribution,
    /// so each point lands in roughly `g` intervals.
    Equalized,
    /// Equal-length intervals `[min + i*len*(1-overlap), .. + len]` with
    /// `len = range / (N - (N-1)*overlap)`; the last interval ends at the
    /// filter maximum exactly.
    FixedWidth { overlap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapperConfig {
    /// Interval count per filter dimension.
    pub resolutions: Vec<usize>,
    /// Overlap factor per filter dimension; used by the equalized mode only.
    pub gains: Vec<f64>,
    pub cover_mode: CoverMode,
    /// Bin count for the merge-height histogram in preimage clustering.
    pub histogram_bins: usize,
}

impl MapperConfig {
    pub fn validate(&self, n_filter_dims: usize) -> Result<()> {
        if n_filter_dims == 0 || n_filter_dims > 2 {
            return Err(Error::InvalidParameter(format!(
                "cover supports 1 or 2 filter dimensions, got {n_filter_dims}"
            )));
        }
        if self.resolutions.len() != n_filter_dims {
            return Err(Error::InvalidParameter(format!(
                "{} resolutions for {n_filter_dims} filter dimensions",
                self.resolutions.len()
            )));
        }
        if self.resolutions.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter(
                "each resolution must be >= 1".into(),
            ));
        }
        match self.cover_mode {
            CoverMode::Equalized => {
                if self.gains.len() != n_filter_dims {
                    return Err(Error::InvalidParameter(format!(
                        "{} gains for {n_filter_dims} filter dimensions",
                        self.gains.len()
                    )));
                }
                if self.gains.iter().any(|g| !g.is_finite() || *g < 1.0) {
                    return Err(Error::InvalidParameter(
                        "each gain must be finite and >= 1".into(),
                    ));
                }
            }
            CoverMode::FixedWidth { overlap } => {
                if !overlap.is_finite() || !(0.0..1.0).contains(&overlap) {
                    return Err(Error::InvalidParameter(
                        "overlap fraction must lie in [0, 1)".into(),
                    ));
                }
            }
        }
        if self.histogram_bins < 2 {
            return Err(Error::InvalidParameter(
                "histogram_bins must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// One cover cell: its grid index, value bounds per dimension, and the
/// indices of the points whose filter values fall inside every band.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverCell {
    pub index: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapperVertex {
    pub id: usize,
    /// Grid index of the cover cell this vertex came from.
    pub cell: Vec<usize>,
    /// Sorted data-point indices.
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapperGraph {
    pub vertices: Vec<MapperVertex>,
    /// Unordered vertex pairs stored as (low, high), sorted.
    pub edges: Vec<(usize, usize)>,
    pub n_points: usize,
}

impl MapperGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unweighted vertex degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertices.len()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// Type-7 interpolated quantile of already-sorted values.
fn quantile_sorted(sorted: &[f64], t: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * t;
    let lo = (h.floor() as usize).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Per-dimension interval bounds in filter-value space.
fn dimension_bands(
    values: &[f64],
    resolution: usize,
    gain: f64,
    mode: CoverMode,
    dim: usize,
) -> Result<Vec<(f64, f64)>> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min == 0.0 {
        return Err(Error::DegenerateFilter(format!(
            "all filter values identical in dimension {dim}"
        )));
    }
    let n = resolution as f64;
    match mode {
        CoverMode::Equalized => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok((0..resolution)
                .map(|i| {
                    let lo = quantile_sorted(&sorted, i as f64 / n);
                    let hi = quantile_sorted(&sorted, ((i as f64 + gain) / n).min(1.0));
                    (lo, hi)
                })
                .collect())
        }
        CoverMode::FixedWidth { overlap } => {
            let len = (max - min) / (n - (n - 1.0) * overlap);
            Ok((0..resolution)
                .map(|i| {
                    let start = min + i as f64 * len * (1.0 - overlap);
                    (start, start + len)
                })
                .collect())
        }
    }
}

/// Cover cells in lexicographic grid order; cells with no points are
/// dropped. `filters` is n x d with d in {1, 2}.
pub fn build_cover(filters: &DMatrix<f64>, config: &MapperConfig) -> Result<Vec<CoverCell>> {
    let d = filters.ncols();
    config.validate(d)?;
    if filters.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite filter value".into()));
    }

    let mut bands: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
    for dim in 0..d {
        let col: Vec<f64> = filters.column(dim).iter().copied().collect();
        let gain = config.gains.get(dim).copied().unwrap_or(1.0);
        bands.push(dimension_bands(
            &col,
            config.resolutions[dim],
            gain,
            config.cover_mode,
            dim,
        )?);
    }

    let mut cells = Vec::new();
    let mut grid_index = vec![0usize; d];
    loop {
        let lower: Vec<f64> = (0..d).map(|k| bands[k][grid_index[k]].0).collect();
        let upper: Vec<f64> = (0..d).map(|k| bands[k][grid_index[k]].1).collect();
        let points: Vec<usize> = (0..filters.nrows())
            .filter(|&i| {
                (0..d).all(|k| {
                    let v = filters[(i, k)];
                    lower[k] <= v && v <= upper[k]
                })
            })
            .collect();
        if !points.is_empty() {
            cells.push(CoverCell {
                index: grid_index.clone(),
                lower,
                upper,
                points,
            });
        }
        // Advance the grid index odometer-style, last dimension fastest.
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(cells);
            }
            k -= 1;
            grid_index[k] += 1;
            if grid_index[k] < config.resolutions[k] {
                break;
            }
            grid_index[k] = 0;
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Minimum-spanning-tree edges of a dense symmetric distance matrix
/// (Prim's algorithm). The edge weights are exactly the single-linkage
/// merge heights.
fn mst_edges(d: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
    let m = d.nrows();
    if m < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; m];
    let mut best = vec![f64::INFINITY; m];
    let mut from = vec![0usize; m];
    in_tree[0] = true;
    for j in 1..m {
        best[j] = d[(0, j)];
    }
    let mut edges = Vec::with_capacity(m - 1);
    for _ in 1..m {
        let next = (0..m)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("a vertex remains outside the tree");
        edges.push((from[next], next, best[next]));
        in_tree[next] = true;
        for j in 0..m {
            if !in_tree[j] && d[(next, j)] < best[j] {
                best[j] = d[(next, j)];
                from[j] = next;
            }
        }
    }
    edges
}

/// Cut height from the merge-height histogram, or `None` when the heights
/// show no gap and the cell stays a single cluster.
///
/// The histogram has `bins` equal-width bins over `[0, max height]`; the
/// scan starts at the first occupied bin, so the cut separates low merge
/// heights from high ones rather than reacting to empty bins below every
/// height. The threshold is the lower edge of the first empty bin found.
fn first_gap_threshold(heights: &[f64], bins: usize) -> Option<f64> {
    let h_max = heights.iter().copied().fold(0.0f64, f64::max);
    if h_max <= 0.0 {
        return None;
    }
    let width = h_max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &h in heights {
        let idx = ((h / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let first_occupied = counts.iter().position(|&c| c > 0)?;
    let gap = (first_occupied + 1..bins).find(|&i| counts[i] == 0)?;
    Some(gap as f64 * width)
}

/// Single-linkage clusters of one cell's points under the first-gap rule.
///
/// Returns a partition of local indices `0..m`, each cluster sorted, the
/// clusters ordered by smallest member. Pairs at distance strictly below
/// the cut height end up in one cluster; without a gap the whole cell is
/// one cluster.
pub fn cluster_preimage(d_sub: &DMatrix<f64>, histogram_bins: usize) -> Vec<Vec<usize>> {
    let m = d_sub.nrows();
    if m == 0 {
        return Vec::new();
    }
    if m == 1 {
        return vec![vec![0]];
    }
    let edges = mst_edges(d_sub);
    let heights: Vec<f64> = edges.iter().map(|&(_, _, w)| w).collect();
    let mut uf = UnionFind::new(m);
    match first_gap_threshold(&heights, histogram_bins) {
        None => return vec![(0..m).collect()],
        Some(cut) => {
            for &(a, b, w) in &edges {
                if w < cut {
                    uf.union(a, b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_to_cluster: Vec<Option<usize>> = vec![None; m];
    for i in 0..m {
        let r = uf.find(i);
        match root_to_cluster[r] {
            Some(c) => clusters[c].push(i),
            None => {
                root_to_cluster[r] = Some(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    clusters
}

/// Full Mapper construction: cover the filter values, cluster each cell's
/// preimage under the data distance, take one vertex per cluster, and
/// connect vertices sharing a point. Vertex order is cell-major with
/// clusters ordered by smallest contained point index, so the output is
/// deterministic given the inputs.
pub fn build_mapper(
    x: &DataMatrix,
    d: &DistMatrix,
    filters: &DMatrix<f64>,
    config: &MapperConfig,
) -> Result<MapperGraph> {
    if filters.nrows() != x.n() || d.n() != x.n() {
        return Err(Error::InvalidData(format!(
            "inconsistent sizes: {} data rows, {} distance rows, {} filter rows",
            x.n(),
            d.n(),
            filters.nrows()
        )));
    }
    let cells = build_cover(filters, config)?;

    let clustered: Vec<(Vec<usize>, Vec<Vec<usize>>)> = cells
        .par_iter()
        .map(|cell| {
            let sub = d.submatrix(&cell.points);
            let clusters = cluster_preimage(&sub, config.histogram_bins);
            let global: Vec<Vec<usize>> = clusters
                .into_iter()
                .map(|c| c.into_iter().map(|i| cell.points[i]).collect())
                .collect();
            (cell.index.clone(), global)
        })
        .collect();

    let mut vertices = Vec::new();
    for (cell_index, clusters) in clustered {
        for points in clusters {
            vertices.push(MapperVertex {
                id: vertices.len(),
                cell: cell_index.clone(),
                points,
            });
        }
    }

    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); x.n()];
    for v in &vertices {
        for &p in &v.points {
            containing[p].push(v.id);
        }
    }
    let mut edges = BTreeSet::new();
    for list in &containing {
        for (a, &u) in list.iter().enumerate() {
            for &v in &list[a + 1..] {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }

    Ok(MapperGraph {
        vertices,
        edges: edges.into_iter().collect(),
        n_points: x.n(),
    })
}
