//! Calibration and analytics for mobile low-cost noise sensors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod calibrate;
pub mod error;
pub mod fsio;
pub mod geo;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod preprocess;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
