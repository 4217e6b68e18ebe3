//! Regression calibrators and their evaluation.

pub mod dataset;
pub mod linear;
pub mod metrics;
pub mod model;
pub mod segmented;
pub mod svr;
pub mod tree;
pub mod validation;

pub use dataset::{Dataset, NODE_COLUMN};
pub use linear::{fit_mlr, fit_pr, fit_slr};
pub use metrics::{evaluate, EvalReport, Metrics, OptionalStat};
pub use model::{
    predict, BreakpointGrid, CalibrationModel, Family, ModelDocument, ModelSpec, Params,
};
pub use segmented::{fit_sr, fit_sr_at};
pub use svr::{fit_svr, fit_svr_capped};
pub use tree::{fit_dt, fit_rfr, ForestParams, Node, Tree};
pub use validation::{
    cross_validate, cross_validate_with, transfer_evaluate, CrossValidation, FoldMode,
};

use crate::error::Result;

/// Fits whichever family `spec` names.
pub fn fit(spec: &ModelSpec, d: &Dataset) -> Result<CalibrationModel> {
    match spec {
        ModelSpec::Slr => fit_slr(d),
        ModelSpec::Mlr => fit_mlr(d),
        ModelSpec::Pr { degree } => fit_pr(d, *degree),
        ModelSpec::Sr { grid } => fit_sr(d, *grid),
        ModelSpec::Svr {
            c,
            epsilon,
            gamma,
            max_iter,
        } => fit_svr_capped(d, *c, *epsilon, *gamma, *max_iter),
        ModelSpec::Dt {
            max_depth,
            min_leaf,
        } => fit_dt(d, *max_depth, *min_leaf),
        ModelSpec::Rfr {
            n_trees,
            max_depth,
            min_leaf,
            feature_subset,
            bootstrap,
            seed,
        } => fit_rfr(
            d,
            ForestParams {
                n_trees: *n_trees,
                max_depth: *max_depth,
                min_leaf: *min_leaf,
                feature_subset: *feature_subset,
                bootstrap: *bootstrap,
                seed: *seed,
            },
        ),
    }
}
