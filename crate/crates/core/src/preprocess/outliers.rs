use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median_sorted;

pub const DEFAULT_FENCE_FACTOR: f64 = 1.5;

/// Lower and upper quartile by the median-of-halves rule.
///
/// The sorted series is split into a lower and an upper half; when the length
/// is odd the middle element belongs to neither half. Each quartile is the
/// median of its half.
pub fn quartiles(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = sorted.len() / 2;
    let lower = &sorted[..half];
    let upper = &sorted[sorted.len() - half..];
    Ok((median_sorted(lower), median_sorted(upper)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Fences {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

pub fn iqr_fences(values: &[f64], fence_factor: f64) -> Result<Fences> {
    if !(fence_factor >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fence factor must be non-negative, got {fence_factor}"
        )));
    }
    let (q1, q3) = quartiles(values)?;
    let iqr = q3 - q1;
    Ok(Fences {
        q1,
        q3,
        lower: q1 - fence_factor * iqr,
        upper: q3 + fence_factor * iqr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSplit {
    pub kept: Vec<f64>,
    pub removed: Vec<f64>,
    /// `true` at each input position that was kept.
    pub mask: Vec<bool>,
    pub fences: Fences,
}

/// Drops values outside `[Q1 − k·IQR, Q3 + k·IQR]`, preserving order.
pub fn remove_outliers_iqr(values: &[f64], fence_factor: f64) -> Result<OutlierSplit> {
    let fences = iqr_fences(values, fence_factor)?;
    let mask: Vec<bool> = values.iter().map(|&v| fences.contains(v)).collect();
    let (kept, removed) =
        values
            .iter()
            .zip(&mask)
            .fold((Vec::new(), Vec::new()), |(mut k, mut r), (&v, &keep)| {
                if keep {
                    k.push(v);
                } else {
                    r.push(v);
                }
                (k, r)
            });
    Ok(OutlierSplit {
        kept,
        removed,
        mask,
        fences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Quartiles by brute force: median of the explicitly built halves.
    fn oracle_quartiles(values: &[f64]) -> (f64, f64) {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let (lo, hi): (Vec<f64>, Vec<f64>) = if n.is_multiple_of(2) {
            (s[..n / 2].to_vec(), s[n / 2..].to_vec())
        } else {
            (s[..n / 2].to_vec(), s[n / 2 + 1..].to_vec())
        };
        let med = |h: &[f64]| {
            let m = h.len();
            if m % 2 == 1 {
                h[m / 2]
            } else {
                (h[m / 2 - 1] + h[m / 2]) / 2.0
            }
        };
        (med(&lo), med(&hi))
    }

    #[test]
    fn classic_example() {
        let v: Vec<f64> = (1..=10).map(f64::from).chain([100.0]).collect();
        let split = remove_outliers_iqr(&v, 1.5).unwrap();
        assert_eq!(split.fences.q1, 3.0);
        assert_eq!(split.fences.q3, 9.0);
        assert_eq!((split.fences.lower, split.fences.upper), (-6.0, 18.0));
        assert_eq!(split.removed, vec![100.0]);
        assert_eq!(split.kept, (1..=10).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn constant_series_removes_nothing() {
        let split = remove_outliers_iqr(&[72.5; 9], 1.5).unwrap();
        assert!(split.removed.is_empty());
        assert_eq!(split.fences.lower, 72.5);
        assert_eq!(split.fences.upper, 72.5);
    }

    #[test]
    fn three_values_is_too_short() {
        assert!(matches!(
            remove_outliers_iqr(&[1.0, 2.0, 3.0], 1.5),
            Err(Error::TooShort { needed: 4, got: 3 })
        ));
    }

    proptest! {
        #[test]
        fn quartiles_match_oracle(v in proptest::collection::vec(-100.0f64..100.0, 4..60)) {
            prop_assert_eq!(quartiles(&v).unwrap(), oracle_quartiles(&v));
        }

        #[test]
        fn split_partitions_input(v in proptest::collection::vec(-100.0f64..100.0, 4..60), k in 0.0f64..3.0) {
            let split = remove_outliers_iqr(&v, k).unwrap();
            prop_assert_eq!(split.kept.len() + split.removed.len(), v.len());
            let (q1, q3) = oracle_quartiles(&v);
            let (lo, hi) = (q1 - k * (q3 - q1), q3 + k * (q3 - q1));
            let expect_removed: Vec<f64> = v.iter().copied().filter(|&x| x < lo || x > hi).collect();
            let expect_kept: Vec<f64> = v.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
            prop_assert_eq!(split.removed, expect_removed);
            prop_assert_eq!(split.kept, expect_kept);
        }

        #[test]
        fn repeated_passes_reach_fixpoint(v in proptest::collection::vec(50.0f64..90.0, 20..200)) {
            let mut current = v;
            let mut prev_removed = usize::MAX;
            let mut passes = 0;
            loop {
                if current.len() < 4 { break; }
                let split = remove_outliers_iqr(&current, 1.5).unwrap();
                passes += 1;
                if split.removed.is_empty() { break; }
                prop_assert!(split.removed.len() < prev_removed || passes == 1);
                prev_removed = split.removed.len();
                current = split.kept;
                prop_assert!(passes < 50);
            }
        }
    }
}
