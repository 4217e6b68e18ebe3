//! Merging of config files with command-line flags, and resolution of the
//! merged options into fully populated settings.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use noisecal::analytics::{DayNight, GroupBy, Period, Zone};
use noisecal::calibrate::{BreakpointGrid, Family, FoldMode, ModelSpec};
use noisecal::geo::{
    Statistic, DEFAULT_BAND_THRESHOLDS, DEFAULT_CELL_SIZE_M, DEFAULT_SPEED_CAP_MPS,
};
use noisecal::ingest::DEFAULT_UTC_OFFSET_SECONDS;
use noisecal::pipeline::PipelineConfig;
use noisecal::preprocess::{
    AveragingMode, PreprocessConfig, DEFAULT_FENCE_FACTOR, DEFAULT_MAX_LAG, DEFAULT_MIN_COUNT,
    DEFAULT_WINDOW,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{AnalyzeOpts, MapOpts, ModelOpts, PrepOpts};
use crate::error::{CliError, CliResult};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_DEPTHS: [usize; 3] = [3, 4, 5];
pub const DEFAULT_HOTSPOT_THRESHOLD: f64 = 90.0;
pub const DEFAULT_BUCKET: u32 = 3600;
pub const DEFAULT_LEQ_INTERVAL: u32 = 3600;
pub const DEFAULT_ZONE: Zone = Zone::Commercial;

/// Overlays the flags that were given on top of the config file, if any.
///
/// Keys in the file use the long flag names without the leading dashes.
/// Unknown keys are rejected.
pub fn merge<T>(cli: &T, file: Option<&Path>) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default + Clone,
{
    let Some(file) = file else {
        return Ok(cli.clone());
    };
    let text = fs::read_to_string(file)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", file.display())))?;
    let parsed: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", file.display())))?;
    let Value::Object(mut merged) = parsed else {
        return Err(CliError::usage(format!(
            "config {} must hold a JSON object",
            file.display()
        )));
    };
    let known = object(T::default())?;
    if let Some(k) = merged.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::usage(format!(
            "config {}: unknown option `{k}`",
            file.display()
        )));
    }
    for (k, v) in object(cli.clone())? {
        let unset = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
        if !unset {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::usage(format!("config {}: {e}", file.display())))
}

fn object<T: Serialize>(v: T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::runtime("options do not serialize to an object")),
    }
}

pub fn parse<T>(flag: &str, text: &str) -> CliResult<T>
where
    T: FromStr<Err = noisecal::Error>,
{
    text.parse()
        .map_err(|e: noisecal::Error| CliError::usage(format!("--{flag}: {e}")))
}

/// An input that must exist before anything runs.
pub fn existing(flag: &str, path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::usage(format!(
            "--{flag}: no such file {}",
            path.display()
        )))
    }
}

pub fn required<T: Clone>(flag: &str, v: &Option<T>) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::usage(format!("--{flag} is required")))
}

fn positive(flag: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!(
            "--{flag} must be positive, got {v}"
        )))
    }
}

fn at_least<T: PartialOrd + std::fmt::Display + Copy>(flag: &str, v: T, min: T) -> CliResult<T> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::usage(format!(
            "--{flag} must be at least {min}, got {v}"
        )))
    }
}

pub fn utc_offset(v: Option<i32>) -> CliResult<i32> {
    let off = v.unwrap_or(DEFAULT_UTC_OFFSET_SECONDS);
    if off.abs() < 86_400 {
        Ok(off)
    } else {
        Err(CliError::usage(format!("--utc-offset out of range: {off}")))
    }
}

pub fn speed_cap(v: Option<f64>) -> CliResult<f64> {
    positive("speed-cap", v.unwrap_or(DEFAULT_SPEED_CAP_MPS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PrepSettings {
    pub window: u32,
    pub fence_factor: f64,
    pub max_lag: usize,
    pub lag: Option<i64>,
    pub min_count: usize,
    pub averaging: AveragingMode,
    pub speed_cap: f64,
}

impl PrepOpts {
    pub fn resolve(&self) -> CliResult<PrepSettings> {
        Ok(PrepSettings {
            window: at_least("window", self.window.unwrap_or(DEFAULT_WINDOW), 1)?,
            fence_factor: positive(
                "fence-factor",
                self.fence_factor.unwrap_or(DEFAULT_FENCE_FACTOR),
            )?,
            max_lag: self.max_lag.unwrap_or(DEFAULT_MAX_LAG),
            lag: self.lag,
            min_count: at_least("min-count", self.min_count.unwrap_or(DEFAULT_MIN_COUNT), 1)?,
            averaging: match &self.averaging {
                Some(s) => parse("averaging", s)?,
                None => AveragingMode::default(),
            },
            speed_cap: speed_cap(self.speed_cap)?,
        })
    }
}

impl PrepSettings {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            preprocess: PreprocessConfig {
                fence_factor: self.fence_factor,
                max_lag: self.max_lag,
                fixed_lag: self.lag,
                window: self.window,
                min_count: self.min_count,
                mode: self.averaging,
            },
            speed_cap: self.speed_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelSettings {
    pub families: Vec<Family>,
    pub folds: usize,
    pub fold_mode: FoldMode,
    pub velocity: bool,
    pub depths: Vec<usize>,
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_features: Option<usize>,
    pub degree: usize,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub svr_gamma: Option<f64>,
    pub svr_max_iter: usize,
    pub transfer_model: Option<PathBuf>,
}

impl ModelOpts {
    pub fn resolve(&self) -> CliResult<ModelSettings> {
        let velocity = self.velocity.unwrap_or(false);
        let families = families(self.family.as_deref().unwrap_or("all"), velocity)?;
        let depths = if self.depths.is_empty() {
            DEFAULT_DEPTHS.to_vec()
        } else {
            self.depths.clone()
        };
        for &d in &depths {
            at_least("depths", d, 1)?;
        }
        let ModelSpec::Svr {
            c,
            epsilon,
            max_iter,
            ..
        } = ModelSpec::default_for(Family::Svr)
        else {
            unreachable!()
        };
        let ModelSpec::Rfr {
            n_trees, min_leaf, ..
        } = ModelSpec::default_for(Family::Rfr)
        else {
            unreachable!()
        };
        let ModelSpec::Pr { degree } = ModelSpec::default_for(Family::Pr) else {
            unreachable!()
        };
        Ok(ModelSettings {
            families,
            folds: at_least("folds", self.folds.unwrap_or(DEFAULT_FOLDS), 2)?,
            fold_mode: match &self.fold_mode {
                Some(s) => parse("fold-mode", s)?,
                None => FoldMode::default(),
            },
            velocity,
            depths,
            n_trees: at_least("n-trees", self.n_trees.unwrap_or(n_trees), 1)?,
            min_leaf: at_least("min-leaf", self.min_leaf.unwrap_or(min_leaf), 1)?,
            max_features: self
                .max_features
                .map(|m| at_least("max-features", m, 1))
                .transpose()?,
            degree: at_least("degree", self.degree.unwrap_or(degree), 1)?,
            svr_c: positive("svr-c", self.svr_c.unwrap_or(c))?,
            svr_epsilon: {
                let e = self.svr_epsilon.unwrap_or(epsilon);
                if e >= 0.0 && e.is_finite() {
                    e
                } else {
                    return Err(CliError::usage(format!(
                        "--svr-epsilon must be ≥ 0, got {e}"
                    )));
                }
            },
            svr_gamma: self
                .svr_gamma
                .map(|g| positive("svr-gamma", g))
                .transpose()?,
            svr_max_iter: at_least("svr-max-iter", self.svr_max_iter.unwrap_or(max_iter), 1)?,
            transfer_model: self
                .transfer_model
                .as_deref()
                .map(|p| existing("transfer-model", p))
                .transpose()?,
        })
    }
}

/// `all` means every family the feature set supports; MLR needs velocity.
fn families(text: &str, velocity: bool) -> CliResult<Vec<Family>> {
    let mut wanted = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            wanted.extend(
                Family::ALL
                    .into_iter()
                    .filter(|f| velocity || *f != Family::Mlr),
            );
        } else {
            let f: Family = parse("family", part)?;
            if f == Family::Mlr && !velocity {
                return Err(CliError::usage(
                    "--family MLR needs a second feature; add --velocity",
                ));
            }
            wanted.push(f);
        }
    }
    if wanted.is_empty() {
        return Err(CliError::usage("--family names no model"));
    }
    Ok(Family::ALL
        .into_iter()
        .filter(|f| wanted.contains(f))
        .collect())
}

impl ModelSettings {
    /// One spec per report row, in report order.
    pub fn specs(&self, seed: u64) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &f in &self.families {
            match f {
                Family::Slr => out.push(ModelSpec::Slr),
                Family::Mlr => out.push(ModelSpec::Mlr),
                Family::Pr => out.push(ModelSpec::Pr {
                    degree: self.degree,
                }),
                Family::Sr => out.push(ModelSpec::Sr {
                    grid: BreakpointGrid::default(),
                }),
                Family::Svr => out.push(ModelSpec::Svr {
                    c: self.svr_c,
                    epsilon: self.svr_epsilon,
                    gamma: self.svr_gamma,
                    max_iter: self.svr_max_iter,
                }),
                Family::Dt => out.extend(self.depths.iter().map(|&d| ModelSpec::Dt {
                    max_depth: d,
                    min_leaf: self.min_leaf,
                })),
                Family::Rfr => out.extend(self.depths.iter().map(|&d| ModelSpec::Rfr {
                    n_trees: self.n_trees,
                    max_depth: d,
                    min_leaf: self.min_leaf,
                    feature_subset: self.max_features,
                    bootstrap: true,
                    seed,
                })),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MapSettings {
    pub cell_size: f64,
    pub statistic: Statistic,
    pub threshold: f64,
    pub bands: Vec<f64>,
}

impl MapOpts {
    pub fn resolve(&self) -> CliResult<MapSettings> {
        let bands = if self.bands.is_empty() {
            DEFAULT_BAND_THRESHOLDS.to_vec()
        } else {
            self.bands.clone()
        };
        if bands.iter().any(|b| !b.is_finite()) || bands.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::usage(
                "--bands must be finite and strictly increasing",
            ));
        }
        let threshold = self.threshold.unwrap_or(DEFAULT_HOTSPOT_THRESHOLD);
        if !threshold.is_finite() {
            return Err(CliError::usage("--threshold must be finite"));
        }
        Ok(MapSettings {
            cell_size: positive("cell-size", self.cell_size.unwrap_or(DEFAULT_CELL_SIZE_M))?,
            statistic: match &self.statistic {
                Some(s) => parse("statistic", s)?,
                None => Statistic::default(),
            },
            threshold,
            bands,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyzeSettings {
    pub group_by: GroupBy,
    pub bucket: u32,
    pub zone: Zone,
    pub periods: Vec<Period>,
    pub leq_interval: u32,
    pub velocity_bin: f64,
    pub day_night: DayNight,
}

impl AnalyzeOpts {
    pub fn resolve(&self) -> CliResult<AnalyzeSettings> {
        let bucket = self.bucket.unwrap_or(DEFAULT_BUCKET);
        if bucket == 0 || bucket > 86_400 {
            return Err(CliError::usage(format!(
                "--bucket must be within 1..=86400, got {bucket}"
            )));
        }
        let leq_interval = self.leq_interval.unwrap_or(DEFAULT_LEQ_INTERVAL);
        if leq_interval == 0 || 86_400 % leq_interval != 0 {
            return Err(CliError::usage(format!(
                "--leq-interval must divide a day, got {leq_interval}"
            )));
        }
        let periods = match self.period.as_deref().map(str::trim) {
            None => vec![Period::Day, Period::Night],
            Some(p) if p.eq_ignore_ascii_case("both") => vec![Period::Day, Period::Night],
            Some(p) => vec![parse("period", p)?],
        };
        let dn = DayNight::default();
        let day_night = DayNight {
            day_start_hour: self.day_start.unwrap_or(dn.day_start_hour),
            day_end_hour: self.day_end.unwrap_or(dn.day_end_hour),
        };
        if day_night.day_start_hour >= day_night.day_end_hour || day_night.day_end_hour > 24 {
            return Err(CliError::usage(
                "--day-start must come before --day-end, both within 0..=24",
            ));
        }
        Ok(AnalyzeSettings {
            group_by: match &self.group_by {
                Some(s) => parse("group-by", s)?,
                None => GroupBy::default(),
            },
            bucket,
            zone: match &self.zone {
                Some(s) => parse("zone", s)?,
                None => DEFAULT_ZONE,
            },
            periods,
            leq_interval,
            velocity_bin: positive(
                "velocity-bin",
                self.velocity_bin
                    .unwrap_or(noisecal::analytics::DEFAULT_VELOCITY_BIN),
            )?,
            day_night,
        })
    }
}
