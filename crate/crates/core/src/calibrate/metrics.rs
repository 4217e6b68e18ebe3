use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{correlation_p_value, pearson};

/// Goodness-of-fit statistics for one prediction/target pairing.
///
/// Statistics that are undefined for the given data (zero variance, too few
/// points) are `None` rather than a placeholder number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub r2: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub pearson_r: Option<f64>,
    pub p_value: Option<f64>,
}

impl Metrics {
    /// Computes every statistic that is defined for the input; needs `n ≥ 1`.
    pub(crate) fn compute(pred: &[f64], actual: &[f64]) -> Self {
        let n = actual.len();
        debug_assert!(n > 0 && pred.len() == n);
        let mean_actual = actual.iter().sum::<f64>() / n as f64;
        let (mut ss_res, mut ss_tot, mut abs) = (0.0, 0.0, 0.0);
        for (p, a) in pred.iter().zip(actual) {
            let e = a - p;
            ss_res += e * e;
            abs += e.abs();
            ss_tot += (a - mean_actual).powi(2);
        }
        let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
        let pearson_r = pearson(actual, pred);
        let p_value = pearson_r.and_then(|r| correlation_p_value(r, n));
        let mae = abs / n as f64;
        // RMSE ≥ MAE holds mathematically; keep it exact under rounding.
        let rmse = (ss_res / n as f64).sqrt().max(mae);
        Self {
            n,
            r2,
            mae,
            rmse,
            pearson_r,
            p_value,
        }
    }
}

/// Metrics over a full set of predictions, plus per-fold metrics when the
/// predictions came out of cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pooled: Metrics,
    pub per_fold: Vec<Metrics>,
}

/// R², MAE, RMSE, Pearson r and its two-tailed p-value.
pub fn evaluate(pred: &[f64], actual: &[f64]) -> Result<EvalReport> {
    if pred.len() != actual.len() {
        return Err(Error::InvalidParameter(format!(
            "prediction length {} differs from target length {}",
            pred.len(),
            actual.len()
        )));
    }
    if actual.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: actual.len(),
        });
    }
    if pred.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite value in evaluation input".into(),
        ));
    }
    Ok(EvalReport {
        pooled: Metrics::compute(pred, actual),
        per_fold: Vec::new(),
    })
}

/// Renders an optional statistic, spelling out `undefined`.
pub struct OptionalStat(pub Option<f64>);

impl fmt::Display for OptionalStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            None => f.write_str("undefined"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let a = [1.0, 2.0, 4.0, 8.0];
        let m = evaluate(&a, &a).unwrap().pooled;
        assert_eq!(m.r2, Some(1.0));
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert!((m.pearson_r.unwrap() - 1.0).abs() < 1e-15);
        assert!(m.p_value.unwrap() < 1e-12);
    }

    #[test]
    fn hand_evaluated_flat_prediction() {
        let m = evaluate(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap().pooled;
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.rmse - 0.8165).abs() < 5e-5);
        assert_eq!(m.r2, Some(0.0));
        assert_eq!(m.pearson_r, None);
        assert_eq!(m.p_value, None);
    }

    #[test]
    fn zero_target_variance_leaves_r2_undefined() {
        let m = evaluate(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap().pooled;
        assert_eq!(m.r2, None);
        assert_eq!(format!("{:.3}", OptionalStat(m.r2)), "undefined");
    }

    #[test]
    fn short_or_mismatched_input_is_rejected() {
        assert!(evaluate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..80)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = evaluate(&p, &a).unwrap().pooled;
            prop_assert!(m.rmse >= m.mae && m.mae >= 0.0);
            if let Some(r2) = m.r2 { prop_assert!(r2 <= 1.0); }
            if let Some(r) = m.pearson_r { prop_assert!((-1.0..=1.0).contains(&r)); }
            if let Some(pv) = m.p_value { prop_assert!((0.0..=1.0).contains(&pv)); }
        }

        #[test]
        fn pearson_is_affine_invariant(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 5..60),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = evaluate(&p, &a).unwrap().pooled.pearson_r;
            let moved: Vec<f64> = p.iter().map(|v| scale * v + shift).collect();
            let negated: Vec<f64> = p.iter().map(|v| -v).collect();
            if let Some(r) = base {
                let r2 = evaluate(&moved, &a).unwrap().pooled.pearson_r.unwrap();
                let rn = evaluate(&negated, &a).unwrap().pooled.pearson_r.unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
                prop_assert!((r + rn).abs() < 1e-9);
            }
        }

        #[test]
        fn p_value_monotone(r1 in 0.0f64..0.99, dr in 0.001f64..0.01, n in 4usize..500) {
            let r2 = (r1 + dr).min(0.999);
            let p1 = correlation_p_value(r1, n).unwrap();
            let p2 = correlation_p_value(r2, n).unwrap();
            prop_assert!(p2 < p1 || (p1 == 0.0 && p2 == 0.0));
            let r = r1.max(0.05);
            let pa = correlation_p_value(r, n).unwrap();
            let pb = correlation_p_value(r, n + 5).unwrap();
            prop_assert!(pb < pa || pa < 1e-300);
        }
    }
}
