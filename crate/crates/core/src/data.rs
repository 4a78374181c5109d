use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An observations-by-features matrix with row and feature labels.
///
/// Rows are observations, columns are features. Construction validates the
/// shape (at least 2 rows and 2 columns) and that every entry is finite;
/// downstream code relies on both and never re-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    feature_names: Vec<String>,
    row_ids: Vec<String>,
}

impl DataMatrix {
    pub fn new(
        values: DMatrix<f64>,
        feature_names: Vec<String>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 || p < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 rows and 2 columns, got {n}x{p}"
            )));
        }
        if feature_names.len() != p {
            return Err(Error::InvalidData(format!(
                "{} feature names for {p} columns",
                feature_names.len()
            )));
        }
        if row_ids.len() != n {
            return Err(Error::InvalidData(format!(
                "{} row ids for {n} rows",
                row_ids.len()
            )));
        }
        if let Some((i, j)) = first_non_finite(&values) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {i}, column {j}"
            )));
        }
        Ok(Self {
            values,
            feature_names,
            row_ids,
        })
    }

    /// Wraps a raw matrix with generated labels (`r0..`, `f0..`).
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        let feature_names = (0..p).map(|j| format!("f{j}")).collect();
        let row_ids = (0..n).map(|i| format!("r{i}")).collect();
        Self::new(values, feature_names, row_ids)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Column mean of feature `j`.
    pub fn column_mean(&self, j: usize) -> f64 {
        self.values.column(j).sum() / self.n() as f64
    }

    /// Sample standard deviation (n-1 denominator) of feature `j`.
    pub fn column_sd(&self, j: usize) -> f64 {
        let n = self.n() as f64;
        let mean = self.column_mean(j);
        let ss: f64 = self.values.column(j).iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}
