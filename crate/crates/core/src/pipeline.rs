//! The end-to-end chain shared by the command line and the test suites:
//! merge, preprocess, derive velocity, build datasets.

use serde::{Deserialize, Serialize};

use crate::calibrate::Dataset;
use crate::error::Result;
use crate::geo::{join_velocity, velocity_trace, VelocityTrace, DEFAULT_SPEED_CAP_MPS};
use crate::ingest::{merge_streams, Campaign, MergeStats};
use crate::preprocess::{
    preprocess_campaign, AlignedSeries, PreprocessConfig, PreprocessOutcome, VELOCITY_FEATURE,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub speed_cap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            speed_cap: DEFAULT_SPEED_CAP_MPS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub merged: Campaign,
    pub merge_stats: MergeStats,
    pub outcome: PreprocessOutcome,
    /// `None` when the track has too few fixes for a velocity trace.
    pub velocity: Option<VelocityTrace>,
    /// Windows carrying the velocity feature; empty without a trace or when
    /// no window joins.
    pub augmented: Vec<AlignedSeries>,
}

impl Prepared {
    pub fn series(&self) -> &[AlignedSeries] {
        &self.outcome.series
    }

    /// Node level only.
    pub fn plain_dataset(&self) -> Result<Dataset> {
        Dataset::from_series(&self.outcome.series, &[])
    }

    /// Node level and velocity.
    pub fn velocity_dataset(&self) -> Result<Dataset> {
        Dataset::from_series(&self.augmented, &[VELOCITY_FEATURE])
    }
}

/// Merges a node log with a reference log and runs the full preparation.
pub fn prepare(node: &Campaign, reference: &Campaign, cfg: &PipelineConfig) -> Result<Prepared> {
    let (merged, merge_stats) = merge_streams(node, reference)?;
    prepare_merged(merged, merge_stats, cfg)
}

pub fn prepare_merged(
    merged: Campaign,
    merge_stats: MergeStats,
    cfg: &PipelineConfig,
) -> Result<Prepared> {
    let outcome = preprocess_campaign(&merged, &cfg.preprocess)?;
    let velocity = velocity_trace(&merged, cfg.speed_cap).ok();
    let augmented = velocity
        .as_ref()
        .and_then(|v| join_velocity(&outcome.series, &v.points).ok())
        .unwrap_or_default();
    Ok(Prepared {
        merged,
        merge_stats,
        outcome,
        velocity,
        augmented,
    })
}
