//! Sample covariance estimation and Gaussian null sampling.
//!
//! The null model draws reference datasets from a centered Gaussian whose
//! covariance matches the sample covariance of the observed data. Two
//! sampling strategies cover the two rank regimes:
//!
//! * `Ridge`: for full-rank (or ridge-repaired) covariances, draws use the
//!   complete eigenbasis. [`ridge_regularize`] shifts a near-singular matrix
//!   to `C + eps*I`, choosing `eps` so the smallest eigenvalue lands at or
//!   above 1e-6.
//! * `ReducedRank`: for rank-deficient covariances (p > n), draws live
//!   exactly in the span of the retained eigenvectors: `X* = Z Lr^{1/2} Vr'`
//!   with `Z` standard normal of shape n x r.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Eigenvalues at or below `RETENTION_RATIO * lambda_max` are treated as
/// numerically zero when counting rank and sampling in reduced-rank mode.
const RETENTION_RATIO: f64 = 1e-12;
/// Minimum eigenvalue below which [`ridge_regularize`] intervenes.
const RIDGE_TRIGGER: f64 = 1e-10;
/// Ridge shift floor; the repaired matrix has min eigenvalue >= this.
const RIDGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    Ridge,
    ReducedRank,
}

/// A symmetric covariance matrix together with its eigendecomposition.
///
/// Eigenvalues are stored in non-increasing order with eigenvector columns
/// aligned; each eigenvector's sign is fixed so its largest-magnitude entry
/// is positive, making the decomposition (and everything seeded from it)
/// deterministic.
#[derive(Debug, Clone)]
pub struct CovModel {
    matrix: DMatrix<f64>,
    epsilon: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    effective_rank: usize,
}

impl CovModel {
    /// Builds the model from an explicit symmetric matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || matrix.ncols() != p {
            return Err(Error::InvalidData(format!(
                "covariance must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut scale = 0.0f64;
        for v in matrix.iter() {
            if !v.is_finite() {
                return Err(Error::InvalidData(
                    "covariance has a non-finite entry".into(),
                ));
            }
            scale = scale.max(v.abs());
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let gap = (matrix[(i, j)] - matrix[(j, i)]).abs();
                if gap > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidData(format!(
                        "covariance asymmetric at ({i},{j}): |delta| = {gap:e}"
                    )));
                }
            }
        }
        // Exact symmetry before decomposition; the validated asymmetry is
        // at rounding level only.
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(sym.clone());
        let effective_rank = count_retained(&eigenvalues);
        Ok(Self {
            matrix: sym,
            epsilon: 0.0,
            eigenvalues,
            eigenvectors,
            effective_rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ridge shift applied so far (0 when untouched).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Non-increasing eigenvalues (all of them, including discarded ones).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector columns aligned with [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Count of eigenvalues above the retention threshold.
    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// `(X - Xbar)' (X - Xbar) / (n - 1)` with centering by column means.
pub fn sample_covariance(x: &DataMatrix) -> Result<CovModel> {
    let n = x.n();
    let p = x.p();
    let mut centered = x.values().clone();
    for j in 0..p {
        let mean = x.column_mean(j);
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    CovModel::from_matrix(cov)
}

/// Shifts a near-singular covariance to `C + eps*I`.
///
/// No-op when the smallest eigenvalue is already at least 1e-10. Otherwise
/// `eps = max(0, -lambda_min) + 1e-6`, which lifts every eigenvalue by the
/// same amount and leaves eigenvectors untouched, so the decomposition is
/// updated analytically. Idempotent: a repaired matrix has min eigenvalue
/// >= 1e-6 and passes through unchanged.
pub fn ridge_regularize(c: CovModel) -> CovModel {
    let lambda_min = c.min_eigenvalue();
    if lambda_min >= RIDGE_TRIGGER {
        return c;
    }
    let eps = (-lambda_min).max(0.0) + RIDGE_FLOOR;
    let mut matrix = c.matrix;
    for i in 0..matrix.nrows() {
        matrix[(i, i)] += eps;
    }
    let eigenvalues = c.eigenvalues.map(|l| l + eps);
    let effective_rank = count_retained(&eigenvalues);
    CovModel {
        matrix,
        epsilon: c.epsilon + eps,
        eigenvalues,
        eigenvectors: c.eigenvectors,
        effective_rank,
    }
}

/// Draws `n` iid rows from `N_p(0, C)`.
///
/// Rows are filled in order and each row consumes its standard-normal
/// coordinates left to right, so a given `(C, n, seed)` always produces the
/// identical matrix regardless of the surrounding call pattern.
pub fn sample_gaussian<R: Rng>(
    c: &CovModel,
    n: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<DataMatrix> {
    let p = c.dim();
    let r = match strategy {
        SamplingStrategy::Ridge => {
            if c.min_eigenvalue() <= 0.0 {
                return Err(Error::DegenerateCovariance(format!(
                    "ridge sampling needs a positive-definite matrix; min eigenvalue {:e} (apply ridge_regularize first)",
                    c.min_eigenvalue()
                )));
            }
            p
        }
        SamplingStrategy::ReducedRank => {
            if c.effective_rank == 0 {
                return Err(Error::DegenerateCovariance(
                    "no retained eigenvalues; cannot sample from a zero covariance".into(),
                ));
            }
            c.effective_rank
        }
    };
    // factor[k][j] = sqrt(lambda_k) * V[j][k]; a row is z (1 x r) times factor.
    let mut factor = DMatrix::zeros(r, p);
    for k in 0..r {
        let s = c.eigenvalues[k].sqrt();
        for j in 0..p {
            factor[(k, j)] = s * c.eigenvectors[(j, k)];
        }
    }
    let mut out = DMatrix::zeros(n, p);
    let mut z = vec![0.0f64; r];
    for i in 0..n {
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..r {
                acc += z[k] * factor[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    DataMatrix::from_values(out)
}

fn count_retained(eigenvalues: &DVector<f64>) -> usize {
    let lambda_max = eigenvalues[0].max(0.0);
    eigenvalues
        .iter()
        .filter(|&&l| l > RETENTION_RATIO * lambda_max && l > 0.0)
        .count()
}

/// Symmetric eigendecomposition with non-increasing eigenvalues and the
/// per-column sign convention (largest-magnitude entry positive).
pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut lead = 0;
        for i in 1..p {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    (values, vectors)
}
