//! Filter functions organizing the Mapper cover.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::distance::{distance_matrix, linf_centrality, DistMatrix, Metric};
use crate::error::{Error, Result};
use crate::mds::classical_mds;

/// One filter column. `axis` is 1-based where present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    LinfCentrality,
    Pcoa { axis: usize },
    KnnGeodesicMds { k: usize, axis: usize },
    /// Externally supplied per-point values, reused across null replicates
    /// with fresh jitter each time.
    External { values: Vec<f64>, jitter_sd: f64 },
}

impl FilterSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            FilterSpec::LinfCentrality => Ok(()),
            FilterSpec::Pcoa { axis } => {
                if *axis == 0 {
                    return Err(Error::InvalidParameter("pcoa axis must be >= 1".into()));
                }
                Ok(())
            }
            FilterSpec::KnnGeodesicMds { k, axis } => {
                if *k == 0 {
                    return Err(Error::InvalidParameter("knn k must be >= 1".into()));
                }
                if *axis == 0 || *axis > 2 {
                    return Err(Error::InvalidParameter(
                        "knn_geodesic_mds axis must be 1 or 2".into(),
                    ));
                }
                if *k >= n {
                    return Err(Error::InvalidParameter(format!(
                        "knn k = {k} must be below the point count {n}"
                    )));
                }
                Ok(())
            }
            FilterSpec::External { values, jitter_sd } => {
                if values.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "external filter has {} values for {n} points",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "external filter has a non-finite value".into(),
                    ));
                }
                if !jitter_sd.is_finite() || *jitter_sd < 0.0 {
                    return Err(Error::InvalidParameter("jitter_sd must be >= 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// Observed values plus iid `N(0, jitter_sd^2)` noise; index `i` of the
/// output corresponds to index `i` of the input. With zero jitter the
/// input is returned verbatim and the generator is left untouched.
pub fn external_filter<R: Rng>(values: &[f64], jitter_sd: f64, rng: &mut R) -> Vec<f64> {
    if jitter_sd == 0.0 {
        return values.to_vec();
    }
    let noise = Normal::new(0.0, jitter_sd).expect("finite non-negative sd");
    values.iter().map(|v| v + rng.sample(noise)).collect()
}

/// Two MDS coordinates of geodesic distances in a directed kNN graph.
///
/// The graph is built under correlation distance: each point gets directed
/// edges to its `k` nearest neighbors (ties at the cutoff broken by lowest
/// index), weighted by distance. All-pairs shortest paths are computed as
/// is, with no symmetrization; unreachable pairs are set to twice the largest
/// finite off-diagonal entry, and the resulting matrix goes through
/// unsquared classical MDS.
pub fn knn_geodesic_mds_filter(x: &DataMatrix, k: usize) -> Result<DMatrix<f64>> {
    let n = x.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "knn k = {k} must be in 1..{n}"
        )));
    }
    let d = distance_matrix(x, Metric::PearsonCorrelation)?;
    let geo = knn_shortest_paths(&d, k);
    classical_mds(&geo, 2, false)
}

fn knn_shortest_paths(d: &DistMatrix, k: usize) -> DMatrix<f64> {
    let n = d.n();
    let dv = d.values();
    let mut out_edges: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dv[(i, a)].total_cmp(&dv[(i, b)]).then(a.cmp(&b)));
        out_edges.push(order[..k].iter().map(|&j| (j, dv[(i, j)])).collect());
    }

    let mut geo = DMatrix::from_element(n, n, f64::INFINITY);
    let mut dist = vec![f64::INFINITY; n];
    for src in 0..n {
        dist.fill(f64::INFINITY);
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((HeapDist(0.0), src)));
        while let Some(Reverse((HeapDist(du), u))) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for &(v, w) in &out_edges[u] {
                let cand = du + w;
                if cand < dist[v] {
                    dist[v] = cand;
                    heap.push(Reverse((HeapDist(cand), v)));
                }
            }
        }
        for (j, &dj) in dist.iter().enumerate() {
            geo[(src, j)] = dj;
        }
    }

    let max_finite = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| geo[(i, j)])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    for v in geo.iter_mut() {
        if !v.is_finite() {
            *v = 2.0 * max_finite;
        }
    }
    geo
}

// Finite non-NaN weights only; total order via total_cmp.
#[derive(PartialEq)]
struct HeapDist(f64);

impl Eq for HeapDist {}

impl PartialOrd for HeapDist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapDist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Assembles the n x d filter matrix for a pipeline run, one column per
/// spec. PCoA axes share one embedding of `d`; the kNN-geodesic axes share
/// one geodesic embedding per `k`. External filters draw their jitter from
/// `rng` in spec order.
pub fn compute_filters<R: Rng>(
    x: &DataMatrix,
    d: &DistMatrix,
    specs: &[FilterSpec],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no filters specified".into()));
    }
    for spec in specs {
        spec.validate(x.n())?;
    }

    let max_pcoa_axis = specs
        .iter()
        .filter_map(|s| match s {
            FilterSpec::Pcoa { axis } => Some(*axis),
            _ => None,
        })
        .max();
    let pcoa = match max_pcoa_axis {
        Some(k) => Some(classical_mds(d.values(), k, true)?),
        None => None,
    };

    let mut geodesic: Vec<(usize, DMatrix<f64>)> = Vec::new();
    for spec in specs {
        if let FilterSpec::KnnGeodesicMds { k, .. } = spec {
            if !geodesic.iter().any(|(kk, _)| kk == k) {
                geodesic.push((*k, knn_geodesic_mds_filter(x, *k)?));
            }
        }
    }

    let mut out = DMatrix::zeros(x.n(), specs.len());
    for (col, spec) in specs.iter().enumerate() {
        let values: Vec<f64> = match spec {
            FilterSpec::LinfCentrality => linf_centrality(d),
            FilterSpec::Pcoa { axis } => {
                let m = pcoa.as_ref().expect("pcoa embedding computed above");
                m.column(axis - 1).iter().copied().collect()
            }
            FilterSpec::KnnGeodesicMds { k, axis } => {
                let m = &geodesic
                    .iter()
                    .find(|(kk, _)| kk == k)
                    .expect("geodesic embedding computed above")
                    .1;
                m.column(axis - 1).iter().copied().collect()
            }
            FilterSpec::External { values, jitter_sd } => {
                external_filter(values, *jitter_sd, rng)
            }
        };
        for (i, v) in values.into_iter().enumerate() {
            out[(i, col)] = v;
        }
    }
    Ok(out)
}
