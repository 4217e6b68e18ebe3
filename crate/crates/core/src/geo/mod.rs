//! GPS-derived velocity and spatial binning.

mod grid;

pub use grid::{
    band_label, build_noise_grid, export_geojson, geojson_string, import_geojson, parse_geojson,
    points_from_campaign, points_from_series, Cell, GridPoint, NoiseGrid, Statistic,
    DEFAULT_BAND_THRESHOLDS, DEFAULT_CELL_SIZE_M,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Campaign;
use crate::preprocess::{AlignedSeries, VELOCITY_FEATURE};

/// Mean Earth radius (IUGG), metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Speeds above this are treated as GPS glitches (about 150 km/h).
pub const DEFAULT_SPEED_CAP_MPS: f64 = 42.0;

/// Great-circle distance in metres.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Speed over one pair of consecutive fixes, stamped at the later fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPoint {
    pub timestamp: i64,
    pub speed: f64,
    pub segment_distance: f64,
    pub dt: f64,
    pub plausible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTrace {
    pub points: Vec<VelocityPoint>,
    /// Consecutive pairs dropped because time did not advance.
    pub skipped: usize,
    pub cap: f64,
}

impl VelocityTrace {
    pub fn implausible(&self) -> usize {
        self.points.iter().filter(|p| !p.plausible).count()
    }
}

pub fn velocity_trace(c: &Campaign, cap: f64) -> Result<VelocityTrace> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "speed cap must be positive, got {cap}"
        )));
    }
    let mut points = Vec::with_capacity(c.samples.len().saturating_sub(1));
    let mut skipped = 0;
    for w in c.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = (b.timestamp - a.timestamp) as f64;
        if dt <= 0.0 {
            skipped += 1;
            continue;
        }
        let d = haversine_m(a.latitude, a.longitude, b.latitude, b.longitude);
        let speed = d / dt;
        points.push(VelocityPoint {
            timestamp: b.timestamp,
            speed,
            segment_distance: d,
            dt,
            plausible: speed <= cap,
        });
    }
    if points.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: points.len(),
        });
    }
    Ok(VelocityTrace {
        points,
        skipped,
        cap,
    })
}

/// Windows that contain at least one plausible velocity point, each carrying
/// the mean of those points as the velocity feature. Other windows are left
/// out of the returned list.
pub fn join_velocity(series: &[AlignedSeries], v: &[VelocityPoint]) -> Result<Vec<AlignedSeries>> {
    let mut plausible: Vec<&VelocityPoint> = v.iter().filter(|p| p.plausible).collect();
    plausible.sort_by_key(|p| p.timestamp);
    let mut out = Vec::new();
    for w in series {
        let lo = plausible.partition_point(|p| p.timestamp < w.window_start);
        let hi = plausible.partition_point(|p| p.timestamp < w.window_end());
        if hi == lo {
            continue;
        }
        let mean = plausible[lo..hi].iter().map(|p| p.speed).sum::<f64>() / (hi - lo) as f64;
        let mut joined = w.clone();
        joined.features.insert(VELOCITY_FEATURE.to_string(), mean);
        out.push(joined);
    }
    if out.is_empty() {
        return Err(Error::NoJoinableWindows(format!(
            "{} windows, {} plausible velocity points",
            series.len(),
            plausible.len()
        )));
    }
    Ok(out)
}
