//! CSV ingestion: comma-separated, UTF-8, dot-decimal numbers.
//!
//! The first row is a required header; the first column holds row ids.
//! Missing or non-numeric cells are rejected outright; imputation is an
//! upstream preprocessing concern, and silently dropping values would
//! change what the sample covariance means.

use std::path::Path;

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// A parsed CSV: row ids, feature names (header minus the id column), and
/// the numeric body in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub id_column: String,
    pub row_ids: Vec<String>,
    pub feature_names: Vec<String>,
    values: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::InvalidData(
            "need a header row with an id column and at least one feature column".into(),
        ));
    }
    let id_column = headers[0].to_string();
    let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if feature_names.iter().any(|name| name.is_empty()) {
        return Err(Error::InvalidData("empty feature name in header".into()));
    }
    for (i, name) in feature_names.iter().enumerate() {
        if feature_names[i + 1..].contains(name) {
            return Err(Error::InvalidData(format!(
                "duplicate feature column {name:?}"
            )));
        }
    }

    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row_id = record
            .get(0)
            .unwrap_or_default()
            .to_string();
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, name) in feature_names.iter().enumerate() {
            let cell = record.get(j + 1).unwrap_or_default();
            if cell.is_empty() {
                return Err(Error::InvalidData(format!(
                    "missing value at row {row_id:?}, column {name:?}"
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::InvalidData(format!(
                    "cannot parse {cell:?} as a number at row {row_id:?}, column {name:?}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {row_id:?}, column {name:?}"
                )));
            }
            row.push(v);
        }
        row_ids.push(row_id);
        values.push(row);
    }
    if values.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 data rows, got {}",
            values.len()
        )));
    }

    Ok(CsvTable {
        id_column,
        row_ids,
        feature_names,
        values,
    })
}

impl CsvTable {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Values of one named column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::InvalidData(format!("no column named {name:?}")))?;
        Ok(self.values.iter().map(|row| row[j]).collect())
    }

    /// The table as a [`DataMatrix`], with the named columns left out.
    pub fn feature_matrix(&self, exclude: &[String]) -> Result<DataMatrix> {
        let kept: Vec<usize> = (0..self.feature_names.len())
            .filter(|&j| !exclude.contains(&self.feature_names[j]))
            .collect();
        if kept.len() < 2 {
            return Err(Error::InvalidData(format!(
                "{} feature columns remain after exclusions; need at least 2",
                kept.len()
            )));
        }
        let n = self.n();
        let m = DMatrix::from_fn(n, kept.len(), |i, c| self.values[i][kept[c]]);
        let names = kept
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        DataMatrix::new(m, names, self.row_ids.clone())
    }
}
