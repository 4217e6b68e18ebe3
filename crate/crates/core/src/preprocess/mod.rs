//! Cleaning and alignment of merged node/reference logs.
//!
//! The chain applied by [`preprocess_campaign`]:
//!
//! 1. IQR outlier removal, run once and independently on the node levels and
//!    on the reference levels. A node outlier drops the sample; a reference
//!    outlier only clears its reference level.
//! 2. Cross-correlation lag search on the 1 Hz grid, then the reference column
//!    is shifted by the winning lag.
//! 3. Averaging over fixed wall-clock windows.

mod average;
mod lag;
mod outliers;

pub use average::{
    leq, time_average, write_series_csv, AlignedSeries, AveragingMode, DEFAULT_MIN_COUNT,
    DEFAULT_WINDOW, VELOCITY_FEATURE,
};
pub use lag::{
    apply_lag, estimate_lag, estimate_lag_sparse, second_grid, LagEstimate, SecondColumn,
    DEFAULT_MAX_LAG,
};
pub use outliers::{
    iqr_fences, quartiles, remove_outliers_iqr, Fences, OutlierSplit, DEFAULT_FENCE_FACTOR,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Campaign, GeoSample};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub fence_factor: f64,
    pub max_lag: usize,
    /// Skip the lag search and shift by this many seconds instead.
    pub fixed_lag: Option<i64>,
    pub window: u32,
    pub min_count: usize,
    pub mode: AveragingMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            fence_factor: DEFAULT_FENCE_FACTOR,
            max_lag: DEFAULT_MAX_LAG,
            fixed_lag: None,
            window: DEFAULT_WINDOW,
            min_count: DEFAULT_MIN_COUNT,
            mode: AveragingMode::Arithmetic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessOutcome {
    pub series: Vec<AlignedSeries>,
    /// `None` when a fixed lag was configured.
    pub lag_estimate: Option<LagEstimate>,
    pub lag: i64,
    pub input_samples: usize,
    pub node_outliers: usize,
    pub ref_outliers: usize,
    pub node_fences: Fences,
    pub ref_fences: Fences,
    /// Campaign after outlier removal and lag correction, before averaging.
    pub aligned: Campaign,
}

impl PreprocessOutcome {
    pub fn outlier_fraction(&self) -> f64 {
        (self.node_outliers + self.ref_outliers) as f64 / (2 * self.input_samples) as f64
    }
}

/// Outlier removal, lag correction, and window averaging of a merged log.
pub fn preprocess_campaign(merged: &Campaign, cfg: &PreprocessConfig) -> Result<PreprocessOutcome> {
    if merged.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    let (cleaned, node_split, ref_split) = remove_campaign_outliers(merged, cfg.fence_factor)?;

    let (lag, lag_estimate) = match cfg.fixed_lag {
        Some(lag) => (lag, None),
        None => {
            let (_, node, reference) = second_grid(&cleaned)?;
            let est = estimate_lag_sparse(&node, &reference, cfg.max_lag)?;
            (est.lag, Some(est))
        }
    };
    let aligned = apply_lag(&cleaned, lag)?;
    let series = time_average(&aligned, cfg.window, cfg.min_count, cfg.mode, lag)?;
    Ok(PreprocessOutcome {
        series,
        lag_estimate,
        lag,
        input_samples: merged.len(),
        node_outliers: node_split.removed.len(),
        ref_outliers: ref_split.removed.len(),
        node_fences: node_split.fences,
        ref_fences: ref_split.fences,
        aligned,
    })
}

fn remove_campaign_outliers(
    c: &Campaign,
    fence_factor: f64,
) -> Result<(Campaign, OutlierSplit, OutlierSplit)> {
    let node_levels: Vec<f64> = c.samples.iter().map(|s| s.node_level).collect();
    let node_split = remove_outliers_iqr(&node_levels, fence_factor)?;
    let ref_levels: Vec<f64> = c.samples.iter().filter_map(|s| s.ref_level).collect();
    let ref_split = remove_outliers_iqr(&ref_levels, fence_factor)?;

    let samples: Vec<GeoSample> = c
        .samples
        .iter()
        .zip(&node_split.mask)
        .filter(|(_, &keep)| keep)
        .map(|(s, _)| GeoSample {
            ref_level: s.ref_level.filter(|&r| ref_split.fences.contains(r)),
            ..*s
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    Ok((
        Campaign {
            samples,
            ..c.clone()
        },
        node_split,
        ref_split,
    ))
}
