use super::dataset::Dataset;
use super::model::{horner, CalibrationModel, ModelSpec, Params};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_with_intercept, Matrix};

pub const MAX_PR_DEGREE: usize = 8;

/// `(intercept, slope)` of the least-squares line through `(x, y)`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let names = [String::from("x")];
    match least_squares_with_intercept(&Matrix::column_vector(x), y, &names) {
        Ok((a, b)) => Ok((a, b[0])),
        Err(Error::RankDeficient { .. }) => Err(Error::ZeroVariance("predictor".into())),
        Err(e) => Err(e),
    }
}

/// Centered sums and the least-squares line of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStats {
    pub intercept: f64,
    pub slope: f64,
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
    pub sse: f64,
}

pub fn line_fit_stats(x: &[f64], y: &[f64]) -> Result<LineStats> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::ZeroVariance("predictor".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LineStats {
        intercept,
        slope,
        sxx,
        sxy,
        syy,
        sse,
    })
}

/// Simple linear regression of the target on the node-level column.
pub fn fit_slr(d: &Dataset) -> Result<CalibrationModel> {
    let (intercept, slope) = line_fit(&d.node_column(), d.y())?;
    Ok(CalibrationModel::assemble(
        ModelSpec::Slr,
        Params::Linear {
            intercept,
            slopes: with_zero_tail(slope, d.p()),
        },
        d,
    ))
}

// SLR ignores the extra columns but still accepts them at prediction time.
fn with_zero_tail(first: f64, p: usize) -> Vec<f64> {
    let mut v = vec![0.0; p];
    v[0] = first;
    v
}

/// Multiple linear regression on every column of the dataset.
pub fn fit_mlr(d: &Dataset) -> Result<CalibrationModel> {
    if d.p() < 2 {
        return Err(Error::InvalidDataset(
            "multiple regression needs at least two predictor columns".into(),
        ));
    }
    let (intercept, slopes) = least_squares_with_intercept(d.x(), d.y(), d.column_names())?;
    Ok(CalibrationModel::assemble(
        ModelSpec::Mlr,
        Params::Linear { intercept, slopes },
        d,
    ))
}

/// Polynomial regression of the given degree on the node-level column.
///
/// The power basis is built on the standardized predictor for conditioning;
/// the reported coefficients are converted back to the original scale.
pub fn fit_pr(d: &Dataset, degree: usize) -> Result<CalibrationModel> {
    if !(1..=MAX_PR_DEGREE).contains(&degree) {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must be in 1..={MAX_PR_DEGREE}, got {degree}"
        )));
    }
    if d.n() <= degree + 1 {
        return Err(Error::TooShort {
            needed: degree + 2,
            got: d.n(),
        });
    }
    let x = d.node_column();
    let center = crate::stats::mean(&x);
    let scale = crate::stats::population_variance(&x).sqrt();
    if scale == 0.0 {
        return Err(Error::ZeroVariance("predictor".into()));
    }
    let mut basis = Vec::with_capacity(x.len() * degree);
    for &xi in &x {
        let z = (xi - center) / scale;
        let mut power = 1.0;
        for _ in 0..degree {
            power *= z;
            basis.push(power);
        }
    }
    let names: Vec<String> = (1..=degree).map(|k| format!("x^{k}")).collect();
    let design = Matrix::from_row_major(x.len(), degree, basis)?;
    let (a, b) = least_squares_with_intercept(&design, d.y(), &names)?;
    let standardized: Vec<f64> = std::iter::once(a).chain(b).collect();
    let coefficients = to_original_scale(&standardized, center, scale);
    Ok(CalibrationModel::assemble(
        ModelSpec::Pr { degree },
        Params::Polynomial {
            center,
            scale,
            standardized,
            coefficients,
        },
        d,
    ))
}

/// Expands `Σ cₖ((x − μ)/σ)ᵏ` into `Σ bⱼ xʲ`.
fn to_original_scale(standardized: &[f64], center: f64, scale: f64) -> Vec<f64> {
    let deg = standardized.len() - 1;
    let mut out = vec![0.0; deg + 1];
    // (x − μ)^k expanded incrementally
    let mut shifted_power = vec![1.0];
    for (k, c) in standardized.iter().enumerate() {
        let factor = c / scale.powi(k as i32);
        for (j, coef) in shifted_power.iter().enumerate() {
            out[j] += factor * coef;
        }
        if k < deg {
            let mut next = vec![0.0; shifted_power.len() + 1];
            for (j, coef) in shifted_power.iter().enumerate() {
                next[j + 1] += coef;
                next[j] -= center * coef;
            }
            shifted_power = next;
        }
    }
    out
}

/// Evaluates a polynomial given by original-scale coefficients.
pub fn eval_polynomial(coefficients: &[f64], x: f64) -> f64 {
    horner(coefficients, x)
}
