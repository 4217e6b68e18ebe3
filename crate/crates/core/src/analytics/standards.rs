use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sorted;
use crate::error::{Error, Result};
use crate::ingest::seconds_of_day;
use crate::preprocess::leq;

/// Ambient noise zones with day/night Leq limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Industrial,
    Commercial,
    Residential,
    Silence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Day,
    Night,
}

impl Zone {
    pub const ALL: [Zone; 4] = [
        Zone::Industrial,
        Zone::Commercial,
        Zone::Residential,
        Zone::Silence,
    ];

    /// Leq limit in dBA.
    pub fn limit(self, period: Period) -> f64 {
        match (self, period) {
            (Zone::Industrial, Period::Day) => 75.0,
            (Zone::Industrial, Period::Night) => 70.0,
            (Zone::Commercial, Period::Day) => 65.0,
            (Zone::Commercial, Period::Night) => 55.0,
            (Zone::Residential, Period::Day) => 55.0,
            (Zone::Residential, Period::Night) => 45.0,
            (Zone::Silence, Period::Day) => 50.0,
            (Zone::Silence, Period::Night) => 40.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Industrial => "industrial",
            Zone::Commercial => "commercial",
            Zone::Residential => "residential",
            Zone::Silence => "silence",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Zone::ALL
            .into_iter()
            .find(|z| z.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Unknown {
                kind: "zone",
                value: s.to_string(),
            })
    }
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Day => "day",
            Period::Night => "night",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "day" => Ok(Period::Day),
            "night" => Ok(Period::Night),
            _ => Err(Error::Unknown {
                kind: "period",
                value: s.to_string(),
            }),
        }
    }
}

/// Local hours bounding the day period, `[day_start, day_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayNight {
    pub day_start_hour: u32,
    pub day_end_hour: u32,
}

impl Default for DayNight {
    fn default() -> Self {
        Self {
            day_start_hour: 6,
            day_end_hour: 22,
        }
    }
}

impl DayNight {
    pub fn period_of(&self, timestamp: i64, utc_offset_seconds: i32) -> Period {
        let h = seconds_of_day(timestamp, utc_offset_seconds) / 3600;
        if (self.day_start_hour..self.day_end_hour).contains(&h) {
            Period::Day
        } else {
            Period::Night
        }
    }
}

/// One aggregated level compared against a limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceItem {
    pub label: String,
    pub level: f64,
    pub count: usize,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceReport {
    pub zone: Zone,
    pub period: Period,
    pub limit: f64,
    pub items: Vec<ExceedanceItem>,
    pub exceedances: usize,
    /// Exceeding items over all items; 0 when there are none.
    pub fraction: f64,
}

/// Fraction of levels strictly above `limit`.
pub fn exceedance_fraction(levels: &[f64], limit: f64) -> f64 {
    if levels.is_empty() {
        return 0.0;
    }
    levels.iter().filter(|&&l| l > limit).count() as f64 / levels.len() as f64
}

/// Checks pre-aggregated levels (`label`, `level`, `count`) against the zone
/// limit; an item exceeds when its level is strictly above the limit.
pub fn standards_check(
    items: &[(String, f64, usize)],
    zone: Zone,
    period: Period,
) -> ExceedanceReport {
    let limit = zone.limit(period);
    let items: Vec<ExceedanceItem> = items
        .iter()
        .map(|(label, level, count)| ExceedanceItem {
            label: label.clone(),
            level: *level,
            count: *count,
            exceeds: *level > limit,
        })
        .collect();
    let exceedances = items.iter().filter(|i| i.exceeds).count();
    let fraction = if items.is_empty() {
        0.0
    } else {
        exceedances as f64 / items.len() as f64
    };
    ExceedanceReport {
        zone,
        period,
        limit,
        items,
        exceedances,
        fraction,
    }
}

/// Energetic means over consecutive `interval`-second blocks of local time,
/// keeping only samples that fall in `period`. Labels are the local block
/// start, `day-offset@hh:mm`.
pub fn leq_intervals(
    samples: &[(i64, f64)],
    period: Period,
    interval: u32,
    day_night: DayNight,
    utc_offset_seconds: i32,
) -> Result<Vec<(String, f64, usize)>> {
    if interval == 0 || 86_400 % interval != 0 {
        return Err(Error::InvalidParameter(format!(
            "Leq interval must divide a day, got {interval} s"
        )));
    }
    let off = utc_offset_seconds as i64;
    let mut blocks: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(t, l) in samples {
        if day_night.period_of(t, utc_offset_seconds) != period {
            continue;
        }
        let local = t + off;
        blocks
            .entry(local.div_euclid(interval as i64))
            .or_default()
            .push(l);
    }
    Ok(blocks
        .into_iter()
        .map(|(block, levels)| {
            let start = block * interval as i64;
            let sod = start.rem_euclid(86_400);
            let label = format!(
                "{}@{:02}:{:02}",
                start.div_euclid(86_400),
                sod / 3600,
                (sod % 3600) / 60
            );
            let v = sorted(levels);
            (label, leq(&v), v.len())
        })
        .collect())
}

/// Leq per local interval during `period`, checked against the zone limit.
pub fn standards_check_samples(
    samples: &[(i64, f64)],
    zone: Zone,
    period: Period,
    interval: u32,
    day_night: DayNight,
    utc_offset_seconds: i32,
) -> Result<ExceedanceReport> {
    let items = leq_intervals(samples, period, interval, day_night, utc_offset_seconds)?;
    Ok(standards_check(&items, zone, period))
}
