//! Loading logs and choosing which level each sample reports.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use noisecal::calibrate::{CalibrationModel, NODE_COLUMN};
use noisecal::geo::{join_velocity, velocity_trace};
use noisecal::ingest::{detect_format, parse_log, Campaign, GeoSample, LogFormat, ParseOptions};
use noisecal::preprocess::{AlignedSeries, VELOCITY_FEATURE};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Parses a log of the expected layout, or of whatever layout its header
/// names when `format` is `None`.
pub fn load_log(path: &Path, format: Option<LogFormat>, utc_offset: i32) -> CliResult<Campaign> {
    let format = match format {
        Some(f) => f,
        None => detect_format(path).map_err(|e| CliError::from(e).context(path.display()))?,
    };
    let opts = ParseOptions {
        utc_offset_seconds: utc_offset,
        ..ParseOptions::default()
    };
    let loaded =
        parse_log(path, format, &opts).map_err(|e| CliError::from(e).context(path.display()))?;
    if !loaded.report.rejects.is_empty() {
        eprintln!(
            "{}: {} of {} rows rejected",
            path.display(),
            loaded.report.rejects.len(),
            loaded.report.total_rows
        );
        let mut err = std::io::stderr().lock();
        let _ = loaded.report.write_rejects(&mut err);
    }
    Ok(loaded.campaign)
}

pub fn load_model(path: &Path) -> CliResult<CalibrationModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read model {}: {e}", path.display())))?;
    let model = CalibrationModel::from_json(&text)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    let ok = match model.column_names.as_slice() {
        [a] => a == NODE_COLUMN,
        [a, b] => a == NODE_COLUMN && b == VELOCITY_FEATURE,
        _ => false,
    };
    if !ok {
        return Err(CliError::usage(format!(
            "model {} uses columns {:?}; only {NODE_COLUMN} and {VELOCITY_FEATURE} can be supplied",
            path.display(),
            model.column_names
        )));
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKind {
    /// What the low-cost node logged.
    Node,
    /// What the reference meter logged.
    Reference,
    /// Node level passed through a calibration model.
    Calibrated,
}

impl std::str::FromStr for LevelKind {
    type Err = noisecal::Error;

    fn from_str(s: &str) -> noisecal::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "node" => Ok(LevelKind::Node),
            "reference" | "ref" => Ok(LevelKind::Reference),
            "calibrated" => Ok(LevelKind::Calibrated),
            _ => Err(noisecal::Error::Unknown {
                kind: "level",
                value: s.to_string(),
            }),
        }
    }
}

pub enum LevelSource<'a> {
    Node,
    Reference,
    Calibrated(&'a CalibrationModel),
}

/// A copy of the campaign whose `node_level` is the chosen level. Samples
/// without that level are dropped.
///
/// A reference log's own reading counts as the reference level. Calibration
/// feeds the model one sample at a time; a velocity model also gets the speed
/// since the previous fix, so the first fix and fixes faster than
/// `speed_cap` have no calibrated level.
pub fn leveled(c: &Campaign, src: &LevelSource, speed_cap: f64) -> CliResult<Campaign> {
    let samples: Vec<GeoSample> = match src {
        LevelSource::Node => {
            if c.format == LogFormat::RefCsv {
                return Err(CliError::usage(format!(
                    "{} is a reference log; it has no node level",
                    c.id
                )));
            }
            c.samples
                .iter()
                .map(|s| with_level(s, s.node_level))
                .collect()
        }
        LevelSource::Reference => c
            .samples
            .iter()
            .filter_map(|s| {
                let l = if c.format == LogFormat::RefCsv {
                    Some(s.node_level)
                } else {
                    s.ref_level
                };
                l.map(|l| with_level(s, l))
            })
            .collect(),
        LevelSource::Calibrated(model) => {
            if c.format == LogFormat::RefCsv {
                return Err(CliError::usage(format!(
                    "{} is a reference log; calibration needs node levels",
                    c.id
                )));
            }
            if model.n_features == 1 {
                c.samples
                    .iter()
                    .map(|s| with_level(s, model.predict_row(&[s.node_level])))
                    .collect()
            } else {
                let speeds: HashMap<i64, f64> = velocity_trace(c, speed_cap)
                    .map(|t| {
                        t.points
                            .iter()
                            .filter(|p| p.plausible)
                            .map(|p| (p.timestamp, p.speed))
                            .collect()
                    })
                    .unwrap_or_default();
                c.samples
                    .iter()
                    .filter_map(|s| {
                        speeds
                            .get(&s.timestamp)
                            .map(|&v| with_level(s, model.predict_row(&[s.node_level, v])))
                    })
                    .collect()
            }
        }
    };
    Ok(Campaign::new(c.id.clone(), LogFormat::NodeCsv, samples).with_meta(c.meta.clone()))
}

fn with_level(s: &GeoSample, level: f64) -> GeoSample {
    GeoSample {
        node_level: level,
        ref_level: None,
        ..*s
    }
}

/// Windows of a leveled campaign carrying the window velocity, for the trend
/// analysis. Both level fields of a window hold its mean level.
pub fn velocity_windows(
    c: &Campaign,
    window: u32,
    speed_cap: f64,
) -> CliResult<Vec<AlignedSeries>> {
    let Ok(trace) = velocity_trace(c, speed_cap) else {
        return Ok(Vec::new());
    };
    let w = window as i64;
    let mut buckets: BTreeMap<i64, Vec<&GeoSample>> = BTreeMap::new();
    for s in &c.samples {
        buckets
            .entry(s.timestamp.div_euclid(w) * w)
            .or_default()
            .push(s);
    }
    let series: Vec<AlignedSeries> = buckets
        .into_iter()
        .map(|(start, v)| {
            let n = v.len() as f64;
            let mean = v.iter().map(|s| s.node_level).sum::<f64>() / n;
            AlignedSeries {
                window_start: start,
                window_len: window,
                node_mean: mean,
                ref_mean: mean,
                sample_count: v.len(),
                latitude: v.iter().map(|s| s.latitude).sum::<f64>() / n,
                longitude: v.iter().map(|s| s.longitude).sum::<f64>() / n,
                features: BTreeMap::new(),
                lag_applied: 0,
            }
        })
        .collect();
    Ok(join_velocity(&series, &trace.points).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use noisecal::calibrate::{fit_slr, Dataset};

    fn merged() -> Campaign {
        let samples = (0..20)
            .map(|i| GeoSample {
                timestamp: 1_000 + i,
                latitude: 17.0 + i as f64 * 1e-4,
                longitude: 78.0,
                node_level: 60.0 + i as f64,
                ref_level: (i % 2 == 0).then_some(70.0 + i as f64),
            })
            .collect();
        Campaign::new("m", LogFormat::MergedCsv, samples)
    }

    #[test]
    fn level_choices() {
        let c = merged();
        let node = leveled(&c, &LevelSource::Node, 42.0).unwrap();
        assert_eq!(node.len(), 20);
        let reference = leveled(&c, &LevelSource::Reference, 42.0).unwrap();
        assert_eq!(reference.len(), 10);
        assert_eq!(reference.samples[1].node_level, 72.0);
        let d = Dataset::from_xy(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        let m = fit_slr(&d).unwrap();
        let cal = leveled(&c, &LevelSource::Calibrated(&m), 42.0).unwrap();
        assert!((cal.samples[0].node_level - 121.0).abs() < 1e-9);
    }

    #[test]
    fn windows_carry_velocity() {
        let w = velocity_windows(&merged(), 10, 42.0).unwrap();
        assert_eq!(w.len(), 2);
        // 1e-4 degrees of latitude per second
        assert!((w[0].velocity().unwrap() - 11.12).abs() < 0.01);
        assert_eq!(w[1].node_mean, 74.5);
    }
}
