use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::segmented::Line;
use super::tree::Tree;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// The seven regression families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SLR")]
    Slr,
    #[serde(rename = "MLR")]
    Mlr,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "SVR")]
    Svr,
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "RFR")]
    Rfr,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Slr,
        Family::Mlr,
        Family::Pr,
        Family::Sr,
        Family::Svr,
        Family::Dt,
        Family::Rfr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Slr => "SLR",
            Family::Mlr => "MLR",
            Family::Pr => "PR",
            Family::Sr => "SR",
            Family::Svr => "SVR",
            Family::Dt => "DT",
            Family::Rfr => "RFR",
        }
    }

    /// Families that only look at the node-level column.
    pub fn uses_node_column_only(self) -> bool {
        matches!(self, Family::Slr | Family::Pr | Family::Sr)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "model family",
                value: s.into(),
            })
    }
}

/// Candidate breakpoints for segmented regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BreakpointGrid {
    /// Percentiles `from..=to` of the predictor in steps of `step`.
    Percentiles { from: f64, to: f64, step: f64 },
    /// Every midpoint between consecutive distinct predictor values.
    Midpoints,
}

impl Default for BreakpointGrid {
    fn default() -> Self {
        BreakpointGrid::Percentiles {
            from: 5.0,
            to: 95.0,
            step: 1.0,
        }
    }
}

pub const DEFAULT_PR_DEGREE: usize = 4;
pub const DEFAULT_SVR_C: f64 = 10.0;
pub const DEFAULT_SVR_EPSILON: f64 = 0.5;
pub const DEFAULT_SVR_MAX_ITER: usize = 100_000;
pub const DEFAULT_MIN_LEAF: usize = 5;
pub const DEFAULT_MAX_DEPTH: usize = 5;
pub const DEFAULT_N_TREES: usize = 100;

/// A family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelSpec {
    #[serde(rename = "SLR")]
    Slr,
    #[serde(rename = "MLR")]
    Mlr,
    #[serde(rename = "PR")]
    Pr { degree: usize },
    #[serde(rename = "SR")]
    Sr { grid: BreakpointGrid },
    #[serde(rename = "SVR")]
    Svr {
        c: f64,
        epsilon: f64,
        /// `None` means `1 / (p · var(X))` of the training predictors.
        gamma: Option<f64>,
        max_iter: usize,
    },
    #[serde(rename = "DT")]
    Dt { max_depth: usize, min_leaf: usize },
    #[serde(rename = "RFR")]
    Rfr {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        /// `None` means `max(1, ⌈p/3⌉)`.
        feature_subset: Option<usize>,
        bootstrap: bool,
        seed: u64,
    },
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Slr => Family::Slr,
            ModelSpec::Mlr => Family::Mlr,
            ModelSpec::Pr { .. } => Family::Pr,
            ModelSpec::Sr { .. } => Family::Sr,
            ModelSpec::Svr { .. } => Family::Svr,
            ModelSpec::Dt { .. } => Family::Dt,
            ModelSpec::Rfr { .. } => Family::Rfr,
        }
    }

    /// The family with its default hyperparameters.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Slr => ModelSpec::Slr,
            Family::Mlr => ModelSpec::Mlr,
            Family::Pr => ModelSpec::Pr {
                degree: DEFAULT_PR_DEGREE,
            },
            Family::Sr => ModelSpec::Sr {
                grid: BreakpointGrid::default(),
            },
            Family::Svr => ModelSpec::Svr {
                c: DEFAULT_SVR_C,
                epsilon: DEFAULT_SVR_EPSILON,
                gamma: None,
                max_iter: DEFAULT_SVR_MAX_ITER,
            },
            Family::Dt => ModelSpec::Dt {
                max_depth: DEFAULT_MAX_DEPTH,
                min_leaf: DEFAULT_MIN_LEAF,
            },
            Family::Rfr => ModelSpec::Rfr {
                n_trees: DEFAULT_N_TREES,
                max_depth: DEFAULT_MAX_DEPTH,
                min_leaf: DEFAULT_MIN_LEAF,
                feature_subset: None,
                bootstrap: true,
                seed: 0,
            },
        }
    }

    /// Short human-readable label, e.g. `DT (depth = 4)`.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Pr { degree } => format!("PR (order = {degree})"),
            ModelSpec::Dt { max_depth, .. } => format!("DT (depth = {max_depth})"),
            ModelSpec::Rfr { max_depth, .. } => format!("RFR (depth = {max_depth})"),
            other => other.family().to_string(),
        }
    }
}

/// Learned parameters, one variant per family shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Params {
    /// `y = intercept + Σ slopes[j]·x[j]` (SLR uses one slope).
    Linear {
        intercept: f64,
        slopes: Vec<f64>,
    },
    /// Polynomial in the standardized predictor `z = (x − center)/scale`.
    /// `coefficients` holds the same polynomial in `x` (`a, b₁, …, bₙ`).
    Polynomial {
        center: f64,
        scale: f64,
        standardized: Vec<f64>,
        coefficients: Vec<f64>,
    },
    /// Left line for `x < breakpoint`, right line for `x ≥ breakpoint`.
    Segmented {
        breakpoint: f64,
        left: Line,
        right: Line,
        sse: f64,
    },
    Svr {
        support_vectors: Vec<Vec<f64>>,
        /// `αᵢ − αᵢ*` for each support vector.
        dual_coef: Vec<f64>,
        bias: f64,
        gamma: f64,
        /// Value of the dual objective at the solution.
        objective: f64,
        iterations: usize,
    },
    Tree {
        tree: Tree,
    },
    Forest {
        trees: Vec<Tree>,
    },
}

/// A fitted calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub spec: ModelSpec,
    pub params: Params,
    pub column_names: Vec<String>,
    /// Predictor columns the model expects at prediction time.
    pub n_features: usize,
    /// `(min, max)` of the training targets.
    pub target_range: (f64, f64),
    /// Training residuals `y − ŷ`.
    pub residuals: Vec<f64>,
    pub training_digest: String,
}

impl CalibrationModel {
    pub(crate) fn assemble(spec: ModelSpec, params: Params, d: &Dataset) -> Self {
        let y = d.y();
        let target_range = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let mut m = Self {
            spec,
            params,
            column_names: d.column_names().to_vec(),
            n_features: d.p(),
            target_range,
            residuals: Vec::new(),
            training_digest: d.digest(),
        };
        m.residuals = d
            .x()
            .iter_rows()
            .zip(y)
            .map(|(row, yi)| yi - m.predict_row(row))
            .collect();
        m
    }

    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn training_sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    /// Predicts one row; the caller guarantees the row width.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let x0 = row[0];
        match &self.params {
            Params::Linear { intercept, slopes } => {
                intercept + slopes.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
            }
            Params::Polynomial {
                center,
                scale,
                standardized,
                ..
            } => horner(standardized, (x0 - center) / scale),
            Params::Segmented {
                breakpoint,
                left,
                right,
                ..
            } => {
                if x0 < *breakpoint {
                    left.eval(x0)
                } else {
                    right.eval(x0)
                }
            }
            Params::Svr {
                support_vectors,
                dual_coef,
                bias,
                gamma,
                ..
            } => {
                bias + support_vectors
                    .iter()
                    .zip(dual_coef)
                    .map(|(sv, c)| c * super::svr::rbf(sv, row, *gamma))
                    .sum::<f64>()
            }
            Params::Tree { tree } => tree.predict_row(row),
            Params::Forest { trees } => {
                trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
            }
        }
    }

    /// Predicts every row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            family: self.family(),
            label: self.spec.label(),
            model: self.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(doc.schema_version));
        }
        Ok(doc.model)
    }
}

/// Free-function form of [`CalibrationModel::predict`].
pub fn predict(m: &CalibrationModel, x: &Matrix) -> Result<Vec<f64>> {
    m.predict(x)
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Versioned, self-describing serialized model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub family: Family,
    pub label: String,
    pub model: CalibrationModel,
}

/// Evaluates `c₀ + c₁z + … + cₙzⁿ`.
pub(crate) fn horner(coefs: &[f64], z: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("LSTM".parse::<Family>().is_err());
    }

    #[test]
    fn linear_prediction() {
        let d = Dataset::from_xy(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        let m = CalibrationModel::assemble(
            ModelSpec::Slr,
            Params::Linear {
                intercept: 1.0,
                slopes: vec![2.0],
            },
            &d,
        );
        assert_eq!(
            m.predict(&Matrix::column_vector(&[3.0])).unwrap(),
            vec![7.0]
        );
        assert!(matches!(
            m.predict(&Matrix::zeros(1, 2)),
            Err(Error::ShapeMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn segmented_boundary_goes_right() {
        let d = Dataset::from_xy(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        let m = CalibrationModel::assemble(
            ModelSpec::Sr {
                grid: BreakpointGrid::default(),
            },
            Params::Segmented {
                breakpoint: 5.0,
                left: Line {
                    intercept: 0.0,
                    slope: 1.0,
                },
                right: Line {
                    intercept: 100.0,
                    slope: 0.0,
                },
                sse: 0.0,
            },
            &d,
        );
        assert_eq!(m.predict_row(&[5.0]), 100.0);
        assert_eq!(m.predict_row(&[4.999]), 4.999);
    }

    #[test]
    fn document_round_trip_and_version_check() {
        let d = Dataset::from_xy(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        let m = CalibrationModel::assemble(
            ModelSpec::Slr,
            Params::Linear {
                intercept: 1.0,
                slopes: vec![2.0],
            },
            &d,
        );
        let text = m.to_json().unwrap();
        assert!(text.contains("\"schema_version\": 1"));
        assert_eq!(CalibrationModel::from_json(&text).unwrap(), m);
        let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert!(matches!(
            CalibrationModel::from_json(&bumped),
            Err(Error::SchemaVersion(99))
        ));
    }
}
