use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::AlignedSeries;

pub const NODE_COLUMN: &str = "node_mean";

/// Predictors and targets for calibration. Column 0 is always the node level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::InvalidDataset(
                "dataset needs at least one column".into(),
            ));
        }
        if x.rows() != y.len() {
            return Err(Error::InvalidDataset(format!(
                "{} predictor rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if column_names.len() != x.cols() {
            return Err(Error::InvalidDataset(format!(
                "{} column names for {} columns",
                column_names.len(),
                x.cols()
            )));
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self { x, y, column_names })
    }

    /// Single-predictor dataset from `(x, y)` pairs.
    pub fn from_xy(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(
            Matrix::column_vector(x),
            y.to_vec(),
            vec![NODE_COLUMN.into()],
        )
    }

    /// Builds a dataset from averaged windows: column 0 is `node_mean`, then one
    /// column per named feature; the target is `ref_mean`. Windows missing any
    /// requested feature are skipped.
    pub fn from_series(series: &[AlignedSeries], features: &[&str]) -> Result<Self> {
        let p = 1 + features.len();
        let mut data = Vec::with_capacity(series.len() * p);
        let mut y = Vec::with_capacity(series.len());
        for s in series {
            let extra: Option<Vec<f64>> = features
                .iter()
                .map(|f| s.features.get(*f).copied())
                .collect();
            if let Some(extra) = extra {
                data.push(s.node_mean);
                data.extend(extra);
                y.push(s.ref_mean);
            }
        }
        let names = std::iter::once(NODE_COLUMN.to_string())
            .chain(features.iter().map(|f| f.to_string()))
            .collect();
        Self::new(Matrix::from_row_major(y.len(), p, data)?, y, names)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn node_column(&self) -> Vec<f64> {
        self.x.column(0)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    /// The dataset restricted to its first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.p() {
            return Err(Error::InvalidParameter(format!(
                "cannot take {k} of {} columns",
                self.p()
            )));
        }
        let data = self
            .x
            .iter_rows()
            .flat_map(|r| r[..k].iter().copied())
            .collect();
        Self::new(
            Matrix::from_row_major(self.n(), k, data)?,
            self.y.clone(),
            self.column_names[..k].to_vec(),
        )
    }

    /// SHA-256 over the column names and the exact bit patterns of every value.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.column_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        h.update((self.n() as u64).to_le_bytes());
        for v in self.x.as_slice().iter().chain(&self.y) {
            h.update(v.to_bits().to_le_bytes());
        }
        to_hex(&h.finalize())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
