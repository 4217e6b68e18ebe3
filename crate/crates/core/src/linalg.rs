//! Dense row-major matrix and the few solvers the linear calibrators need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDataset(format!(
                "{} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDataset("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Solves the square system `a·x = b` by Gaussian elimination with partial
/// pivoting. `a` is `n×n` row-major. Returns `None` on a zero pivot.
pub fn solve_partial_pivot(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for k in 0..n {
        let (piv, max) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if max == 0.0 || !max.is_finite() {
            return None;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k * n + k];
    }
    Some(x)
}

/// Relative threshold on a Cholesky pivot below which a column is treated as
/// linearly dependent on the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares with an intercept, via the normal equations on
/// centered predictors. Returns `(intercept, slopes)`.
///
/// Before solving, a Cholesky pass over the centered Gram matrix detects
/// exact (to `RANK_TOL`) collinearity and names the dependent columns.
pub fn least_squares_with_intercept(
    x: &Matrix,
    y: &[f64],
    names: &[String],
) -> Result<(f64, Vec<f64>)> {
    let n = x.rows();
    let p = x.cols();
    if n != y.len() {
        return Err(Error::InvalidDataset(format!(
            "{n} rows of predictors but {} targets",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::InvalidDataset(format!(
            "{n} rows cannot determine {} coefficients",
            p + 1
        )));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for (row, &yi) in x.iter_rows().zip(y) {
        let dy = yi - y_mean;
        for j in 0..p {
            let dj = row[j] - means[j];
            rhs[j] += dj * dy;
            for k in j..p {
                gram[j * p + k] += dj * (row[k] - means[k]);
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[j * p + k] = gram[k * p + j];
        }
    }

    check_rank(&gram, p, names)?;

    let slopes = solve_partial_pivot(gram, rhs).ok_or_else(|| Error::RankDeficient {
        columns: names.to_vec(),
    })?;
    let intercept = y_mean - slopes.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok((intercept, slopes))
}

fn check_rank(gram: &[f64], p: usize, names: &[String]) -> Result<()> {
    let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let diag = gram[j * p + j];
        if diag <= 0.0 {
            // constant column: collinear with the intercept
            return Err(Error::RankDeficient {
                columns: vec![name(j), "intercept".into()],
            });
        }
        let mut d = diag;
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if d <= RANK_TOL * diag {
            // Column j lies in the span of columns 0..j; find which ones.
            let sub: Vec<f64> = (0..j)
                .flat_map(|r| (0..j).map(move |c| (r, c)))
                .map(|(r, c)| gram[r * p + c])
                .collect();
            let target: Vec<f64> = (0..j).map(|r| gram[r * p + j]).collect();
            let mut columns = Vec::new();
            if let Some(coef) = solve_partial_pivot(sub, target) {
                let scale = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                for (k, c) in coef.iter().enumerate() {
                    if c.abs() > 1e-8 * scale {
                        columns.push(name(k));
                    }
                }
            }
            columns.push(name(j));
            return Err(Error::RankDeficient { columns });
        }
        let djj = d.sqrt();
        l[j * p + j] = djj;
        for i in j + 1..p {
            let mut s = gram[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / djj;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = vec![0.0, 1.0, 1.0, 1.0];
        let x = solve_partial_pivot(a, vec![2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_system_returns_none() {
        assert!(solve_partial_pivot(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn duplicate_column_is_named() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let v = i as f64 * 0.7 + (i * i) as f64 * 0.01;
                vec![v, (i % 3) as f64, v]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        match least_squares_with_intercept(&x, &y, &names) {
            Err(Error::RankDeficient { columns }) => {
                assert_eq!(columns, vec!["a".to_string(), "c".to_string()]);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
