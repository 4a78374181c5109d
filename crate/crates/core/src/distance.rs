//! Pairwise distance matrices and the L-infinity centrality filter.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Euclidean after dividing each column by its sample standard deviation.
    VarianceNormalizedEuclidean,
    /// `1 - corr(row_i, row_j)` across features.
    PearsonCorrelation,
}

/// Symmetric non-negative distances with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    values: DMatrix<f64>,
    metric: Metric,
}

impl DistMatrix {
    /// Validates symmetry (1e-12 relative), zero diagonal, and sign.
    pub fn from_values(values: DMatrix<f64>, metric: Metric) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::InvalidData(format!(
                "distance matrix must be square and nonempty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidData(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidData(format!(
                        "invalid distance {v} at ({i},{j})"
                    )));
                }
                if (v - values[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidData(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { values, metric })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Distances restricted to the given point indices, in their order.
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.values[(idx[a], idx[b])])
    }
}

pub fn distance_matrix(x: &DataMatrix, metric: Metric) -> Result<DistMatrix> {
    let values = match metric {
        Metric::Euclidean => euclidean(x.values()),
        Metric::VarianceNormalizedEuclidean => {
            let mut scaled = x.values().clone();
            for j in 0..x.p() {
                let sd = x.column_sd(j);
                if sd <= 0.0 {
                    return Err(Error::Metric(format!(
                        "column '{}' has zero variance; variance-normalized distances are undefined",
                        x.feature_names()[j]
                    )));
                }
                for i in 0..x.n() {
                    scaled[(i, j)] /= sd;
                }
            }
            euclidean(&scaled)
        }
        Metric::PearsonCorrelation => pearson(x)?,
    };
    DistMatrix::from_values(values, metric)
}

fn euclidean(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m.row(i) - m.row(j)).norm();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn pearson(x: &DataMatrix) -> Result<DMatrix<f64>> {
    let n = x.n();
    let p = x.p() as f64;
    // Center each row across features and pre-compute its norm; a row that
    // is numerically constant has no direction to correlate against.
    let mut centered = x.values().clone();
    let mut norms = vec![0.0f64; n];
    for i in 0..n {
        let mean = x.values().row(i).sum() / p;
        let mut ss = 0.0;
        let mut scale = 0.0f64;
        for j in 0..x.p() {
            let c = x.values()[(i, j)] - mean;
            centered[(i, j)] = c;
            ss += c * c;
            scale = scale.max(x.values()[(i, j)].abs());
        }
        norms[i] = ss.sqrt();
        if norms[i] <= 1e-12 * scale.max(1e-300) {
            return Err(Error::Metric(format!(
                "row '{}' has zero variance across features; correlation distance is undefined",
                x.row_ids()[i]
            )));
        }
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = centered.row(i).dot(&centered.row(j));
            // Rounding can push |corr| a hair past 1; clamp to keep the
            // matrix non-negative.
            let v = (1.0 - dot / (norms[i] * norms[j])).max(0.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Eccentricity filter: `f(i) = max_j D[i][j]`.
pub fn linf_centrality(d: &DistMatrix) -> Vec<f64> {
    (0..d.n())
        .map(|i| d.values.row(i).iter().fold(0.0f64, |a, &v| a.max(v)))
        .collect()
}
