use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Campaign;

pub const DEFAULT_WINDOW: u32 = 10;
pub const DEFAULT_MIN_COUNT: usize = 5;

pub const VELOCITY_FEATURE: &str = "velocity_mps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    /// Plain mean of the dBA values.
    #[default]
    Arithmetic,
    /// Equivalent continuous level, `10·log10(mean(10^(L/10)))`.
    Energetic,
}

impl FromStr for AveragingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arithmetic" => Ok(AveragingMode::Arithmetic),
            "energetic" | "leq" => Ok(AveragingMode::Energetic),
            _ => Err(Error::Unknown {
                kind: "averaging mode",
                value: s.into(),
            }),
        }
    }
}

impl AveragingMode {
    pub fn average(self, levels: &[f64]) -> f64 {
        match self {
            AveragingMode::Arithmetic => crate::stats::mean(levels),
            AveragingMode::Energetic => leq(levels),
        }
    }
}

/// Energetic (Leq) average of dBA levels.
pub fn leq(levels: &[f64]) -> f64 {
    let energy = levels.iter().map(|l| 10f64.powf(l / 10.0)).sum::<f64>() / levels.len() as f64;
    10.0 * energy.log10()
}

/// One averaging window of a lag-corrected campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeries {
    pub window_start: i64,
    pub window_len: u32,
    pub node_mean: f64,
    pub ref_mean: f64,
    pub sample_count: usize,
    /// Mean position of the window's samples.
    pub latitude: f64,
    pub longitude: f64,
    pub features: BTreeMap<String, f64>,
    pub lag_applied: i64,
}

impl AlignedSeries {
    pub fn window_end(&self) -> i64 {
        self.window_start + self.window_len as i64
    }

    pub fn velocity(&self) -> Option<f64> {
        self.features.get(VELOCITY_FEATURE).copied()
    }
}

/// Averages the paired samples of a campaign over fixed windows aligned to
/// epoch multiples of `window` seconds. Windows with fewer than `min_count`
/// paired samples are dropped.
pub fn time_average(
    c: &Campaign,
    window: u32,
    min_count: usize,
    mode: AveragingMode,
    lag_applied: i64,
) -> Result<Vec<AlignedSeries>> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "window must be at least 1 s".into(),
        ));
    }
    let w = window as i64;
    let mut buckets: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, s) in c.samples.iter().enumerate() {
        if s.ref_level.is_some() {
            buckets
                .entry(s.timestamp.div_euclid(w) * w)
                .or_default()
                .push(i);
        }
    }
    let out: Vec<AlignedSeries> = buckets
        .into_iter()
        .filter(|(_, idx)| idx.len() >= min_count.max(1))
        .map(|(start, idx)| {
            let node: Vec<f64> = idx.iter().map(|&i| c.samples[i].node_level).collect();
            let reference: Vec<f64> = idx.iter().filter_map(|&i| c.samples[i].ref_level).collect();
            let n = idx.len() as f64;
            AlignedSeries {
                window_start: start,
                window_len: window,
                node_mean: mode.average(&node),
                ref_mean: mode.average(&reference),
                sample_count: idx.len(),
                latitude: idx.iter().map(|&i| c.samples[i].latitude).sum::<f64>() / n,
                longitude: idx.iter().map(|&i| c.samples[i].longitude).sum::<f64>() / n,
                features: BTreeMap::new(),
                lag_applied,
            }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoWindows { min_count });
    }
    Ok(out)
}

/// Writes windows as `window_start,node_mean,ref_mean,count,velocity_mps,lag_applied`.
/// A window without a velocity feature leaves that field empty.
pub fn write_series_csv(series: &[AlignedSeries], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "window_start",
        "node_mean",
        "ref_mean",
        "count",
        VELOCITY_FEATURE,
        "lag_applied",
    ])?;
    for s in series {
        w.write_record([
            s.window_start.to_string(),
            format!("{:.6}", s.node_mean),
            format!("{:.6}", s.ref_mean),
            s.sample_count.to_string(),
            s.velocity().map(|v| format!("{v:.6}")).unwrap_or_default(),
            s.lag_applied.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
