use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::fit;
use super::metrics::{evaluate, EvalReport, Metrics};
use super::model::{CalibrationModel, ModelSpec};
use crate::error::{Error, Result};

/// How rows are dealt into folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldMode {
    /// Seeded shuffle; row at shuffled position `i` goes to fold `i mod k`.
    #[default]
    Shuffled,
    /// Contiguous blocks in row order (time order for window series).
    Blocked,
}

impl std::str::FromStr for FoldMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shuffled" | "shuffle" => Ok(FoldMode::Shuffled),
            "blocked" | "block" => Ok(FoldMode::Blocked),
            _ => Err(Error::Unknown {
                kind: "fold mode",
                value: s.to_string(),
            }),
        }
    }
}

/// Fold index of every row. Fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64, mode: FoldMode) -> Vec<usize> {
    let mut assign = vec![0; n];
    match mode {
        FoldMode::Shuffled => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            for (pos, &row) in order.iter().enumerate() {
                assign[row] = pos % folds;
            }
        }
        FoldMode::Blocked => {
            let (base, extra) = (n / folds, n % folds);
            let mut row = 0;
            for f in 0..folds {
                let size = base + usize::from(f < extra);
                for a in &mut assign[row..row + size] {
                    *a = f;
                }
                row += size;
            }
        }
    }
    assign
}

/// Held-out predictions, in original row order, together with the report.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub report: EvalReport,
    pub predictions: Vec<f64>,
    pub folds: Vec<usize>,
}

/// k-fold cross-validation with shuffled folds.
pub fn cross_validate(
    d: &Dataset,
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    cross_validate_with(d, spec, folds, seed, FoldMode::Shuffled).map(|cv| cv.report)
}

pub fn cross_validate_with(
    d: &Dataset,
    spec: &ModelSpec,
    folds: usize,
    seed: u64,
    mode: FoldMode,
) -> Result<CrossValidation> {
    if folds < 2 {
        return Err(Error::InvalidParameter("folds must be at least 2".into()));
    }
    if d.n() < folds {
        return Err(Error::TooShort {
            needed: folds,
            got: d.n(),
        });
    }
    let assign = fold_assignment(d.n(), folds, seed, mode);
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..d.n()).partition(|&i| assign[i] == k);
            let model = fit(spec, &d.subset(&train)).map_err(|e| Error::Fold {
                fold: k,
                source: Box::new(e),
            })?;
            let held = d.subset(&test);
            let pred = model.predict(held.x())?;
            Ok((test, pred))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![0.0; d.n()];
    let mut fold_metrics = Vec::with_capacity(folds);
    for (test, pred) in &per_fold {
        let actual: Vec<f64> = test.iter().map(|&i| d.y()[i]).collect();
        for (&i, &p) in test.iter().zip(pred) {
            predictions[i] = p;
        }
        fold_metrics.push(Metrics::compute(pred, &actual));
    }
    let mut report = evaluate(&predictions, d.y())?;
    report.per_fold = fold_metrics;
    Ok(CrossValidation {
        report,
        predictions,
        folds: assign,
    })
}

/// Scores a model fitted elsewhere on `target`.
pub fn transfer_evaluate(m: &CalibrationModel, target: &Dataset) -> Result<EvalReport> {
    if target.n() == 0 {
        return Err(Error::InvalidDataset("empty target dataset".into()));
    }
    let pred = m.predict(target.x())?;
    evaluate(&pred, target.y())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::model::Family;
    use proptest::prelude::*;

    #[test]
    fn noiseless_line_is_perfect() {
        let x: Vec<f64> = (0..50).map(|i| 40.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 0.9 * v).collect();
        let d = Dataset::from_xy(&x, &y).unwrap();
        let r = cross_validate(&d, &ModelSpec::Slr, 10, 1).unwrap();
        assert!((r.pooled.r2.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.pooled.rmse < 1e-9);
        assert_eq!(r.per_fold.len(), 10);
    }

    #[test]
    fn leave_one_out_mae_is_mean_held_out_residual() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let y = [
            1.0, 2.5, 2.9, 4.2, 5.1, 5.8, 7.3, 8.1, 8.7, 10.4, 11.0, 11.9,
        ];
        let d = Dataset::from_xy(&x, &y).unwrap();
        let cv = cross_validate_with(&d, &ModelSpec::Slr, 12, 5, FoldMode::Shuffled).unwrap();
        assert!(cv.report.per_fold.iter().all(|m| m.n == 1));
        // refit by hand with each point removed
        let mut abs = 0.0;
        for i in 0..12 {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                (0..12).filter(|&j| j != i).map(|j| (x[j], y[j])).unzip();
            let mx = xs.iter().sum::<f64>() / 11.0;
            let my = ys.iter().sum::<f64>() / 11.0;
            let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
            let b = sxy / sxx;
            abs += (y[i] - (my - b * mx) - b * x[i]).abs();
        }
        assert!((cv.report.pooled.mae - abs / 12.0).abs() < 1e-9);
    }

    #[test]
    fn more_folds_than_rows() {
        let d = Dataset::from_xy(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!(cross_validate(&d, &ModelSpec::Slr, 5, 0).is_err());
        assert!(cross_validate(&d, &ModelSpec::Slr, 1, 0).is_err());
    }

    #[test]
    fn fold_errors_carry_index() {
        // fold 1 trains on the three x = 1 rows
        let x = [1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let d = Dataset::from_xy(&x, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let err = cross_validate_with(&d, &ModelSpec::Slr, 2, 0, FoldMode::Blocked).unwrap_err();
        assert!(matches!(err, Error::Fold { fold: 1, .. }), "{err:?}");
    }

    #[test]
    fn transfer_on_training_set_matches_evaluate() {
        let x: Vec<f64> = (0..30).map(|i| 50.0 + (i as f64 * 1.7) % 23.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.01 * v * v + 20.0).collect();
        let d = Dataset::from_xy(&x, &y).unwrap();
        for fam in Family::ALL.into_iter().filter(|f| *f != Family::Mlr) {
            let m = fit(&ModelSpec::default_for(fam), &d).unwrap();
            let a = transfer_evaluate(&m, &d).unwrap();
            let b = evaluate(&m.predict(d.x()).unwrap(), d.y()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cv_is_deterministic() {
        let x: Vec<f64> = (0..120).map(|i| 50.0 + ((i * 37) % 41) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 4.0).sin() + v).collect();
        let d = Dataset::from_xy(&x, &y).unwrap();
        let spec = ModelSpec::Rfr {
            n_trees: 8,
            max_depth: 4,
            min_leaf: 3,
            feature_subset: None,
            bootstrap: true,
            seed: 3,
        };
        let a = cross_validate_with(&d, &spec, 10, 11, FoldMode::Shuffled).unwrap();
        let b = cross_validate_with(&d, &spec, 10, 11, FoldMode::Shuffled).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn fold_sizes_balanced(n in 2usize..300, k in 2usize..20, seed in any::<u64>(), blocked in any::<bool>()) {
            prop_assume!(k <= n);
            let mode = if blocked { FoldMode::Blocked } else { FoldMode::Shuffled };
            let a = fold_assignment(n, k, seed, mode);
            let mut sizes = vec![0usize; k];
            for f in a { sizes[f] += 1; }
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            prop_assert!(hi - lo <= 1 && lo >= 1);
        }
    }
}
