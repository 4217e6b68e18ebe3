use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mean_var;
use crate::calibrate::linear::line_fit_stats;
use crate::error::{Error, Result};
use crate::preprocess::AlignedSeries;
use crate::stats::{correlation_p_value, student_t_quantile};

pub const DEFAULT_VELOCITY_BIN: f64 = 1.0;
pub const MIN_TREND_WINDOWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityBin {
    /// Lower edge, m/s.
    pub start: f64,
    pub mean_dba: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityTrend {
    pub bins: Vec<VelocityBin>,
    pub n: usize,
    /// dBA per m/s, least squares over windows.
    pub slope: f64,
    pub intercept: f64,
    /// 95 % confidence interval of the slope.
    pub slope_ci: (f64, f64),
    pub pearson_r: f64,
    pub p_value: f64,
}

/// Binned mean level against window velocity and the least-squares slope of
/// level on velocity. Windows without a velocity feature are ignored.
pub fn velocity_noise_trend(
    series: &[AlignedSeries],
    bin_width: f64,
    level: impl Fn(&AlignedSeries) -> f64,
) -> Result<VelocityTrend> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let pairs: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|w| w.velocity().map(|v| (v, level(w))))
        .collect();
    if pairs.len() < MIN_TREND_WINDOWS {
        return Err(Error::TooShort {
            needed: MIN_TREND_WINDOWS,
            got: pairs.len(),
        });
    }
    let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(v, l) in &pairs {
        bins.entry((v / bin_width).floor() as i64)
            .or_default()
            .push(l);
    }
    if bins.len() < 2 {
        return Err(Error::InvalidDataset(
            "all velocities fall in one bin; no trend to estimate".into(),
        ));
    }
    let bins: Vec<VelocityBin> = bins
        .into_iter()
        .map(|(k, levels)| {
            let v = super::sorted(levels);
            VelocityBin {
                start: k as f64 * bin_width,
                mean_dba: mean_var(&v).0,
                count: v.len(),
            }
        })
        .collect();

    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let n = x.len();
    let fit = line_fit_stats(&x, &y)?;
    let df = (n - 2) as f64;
    let se = (fit.sse / df / fit.sxx).sqrt();
    let half = student_t_quantile(0.975, df) * se;
    let (pearson_r, p_value) = if fit.syy > 0.0 {
        let r = (fit.sxy / (fit.sxx * fit.syy).sqrt()).clamp(-1.0, 1.0);
        (r, correlation_p_value(r, n).unwrap_or(1.0))
    } else {
        // flat levels: no association
        (0.0, 1.0)
    };
    Ok(VelocityTrend {
        bins,
        n,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci: (fit.slope - half, fit.slope + half),
        pearson_r,
        p_value,
    })
}
