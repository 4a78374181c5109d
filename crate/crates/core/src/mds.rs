//! Classical multidimensional scaling (principal coordinates analysis).

use nalgebra::DMatrix;

use crate::covariance::sorted_symmetric_eigen;
use crate::error::{Error, Result};

/// Embeds an n x n dissimilarity matrix into `k` coordinates.
///
/// With `square_entries` set this is textbook PCoA: the Gram matrix is
/// `B = -1/2 H (D o D) H` with `H = I - 11'/n`. Without it, `D` itself is
/// double-centered: the behavior of feeding a precomputed (possibly
/// asymmetric, e.g. directed shortest-path) matrix straight into an
/// implementation that expects squared dissimilarities. `B` is symmetrized
/// as `(B + B')/2` before decomposition, so asymmetric input is accepted.
///
/// Coordinates come from the top `k` strictly positive eigenvalues, column
/// `j` scaled by `sqrt(lambda_j)`; non-positive axes are skipped. Requesting
/// more axes than there are positive eigenvalues is a dimension error,
/// except for the fully degenerate case (all points coincide, `B = 0`)
/// which embeds as all-zero coordinates. Each column's sign is chosen so
/// its largest-magnitude entry is positive.
pub fn classical_mds(d: &DMatrix<f64>, k: usize, square_entries: bool) -> Result<DMatrix<f64>> {
    let n = d.nrows();
    if n == 0 || d.ncols() != n {
        return Err(Error::InvalidData(format!(
            "dissimilarity matrix must be square and nonempty, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("requested 0 coordinates".into()));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "dissimilarity matrix has a non-finite entry".into(),
        ));
    }

    let m = if square_entries {
        d.map(|v| v * v)
    } else {
        d.clone()
    };
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (m[(i, j)] - row_means[i] - col_means[j] + grand);
        }
    }
    let b = (&b + b.transpose()) * 0.5;

    let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(b);
    let scale = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        // All points coincide: the zero embedding in any dimension.
        return Ok(DMatrix::zeros(n, k));
    }
    let pos_tol = 1e-12 * scale;
    let positive: Vec<usize> = (0..n).filter(|&i| eigenvalues[i] > pos_tol).collect();
    if positive.len() < k {
        return Err(Error::Dimension(format!(
            "requested {k} coordinates but only {} positive eigenvalue axes are available",
            positive.len()
        )));
    }
    let mut coords = DMatrix::zeros(n, k);
    for (col, &ax) in positive.iter().take(k).enumerate() {
        let s = eigenvalues[ax].sqrt();
        for i in 0..n {
            coords[(i, col)] = s * eigenvectors[(i, ax)];
        }
    }
    Ok(coords)
}
