//! Campaign logs: parsing, validation, persistence, and node/reference merging.
//!
//! Logs are comma-separated with a fixed header:
//!
//! ```text
//! datetime,latitude,longitude,node_dba[,ref_dba]
//! ```
//!
//! Timestamps are local wall-clock time written `dd:mm:yyyy hh:mm:ss`
//! (`dd-mm-yyyy hh:mm:ss` is also accepted) and converted to UTC epoch seconds
//! using a configurable offset. Bad rows are rejected individually; a file is
//! refused only when more than half of its rows are rejected.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEVEL_MIN_DBA: f64 = 30.0;
pub const LEVEL_MAX_DBA: f64 = 130.0;

/// Default local offset of campaign logs, +05:30.
pub const DEFAULT_UTC_OFFSET_SECONDS: i32 = 5 * 3600 + 30 * 60;

const TIMESTAMP_FORMATS: [&str; 2] = ["%d:%m:%Y %H:%M:%S", "%d-%m-%Y %H:%M:%S"];
const WRITE_FORMAT: &str = "%d:%m:%Y %H:%M:%S";

/// One timestamped, geotagged measurement.
///
/// `node_level` is the reading of the instrument that produced the log: the
/// low-cost node for node and merged logs, the meter itself for reference
/// logs. `ref_level` is only populated on merged logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoSample {
    pub timestamp: i64,
    pub latitude: f64,
    pub longitude: f64,
    pub node_level: f64,
    pub ref_level: Option<f64>,
}

impl GeoSample {
    pub fn is_paired(&self) -> bool {
        self.ref_level.is_some()
    }
}

/// Which log layout a file (and the campaign parsed from it) follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogFormat {
    NodeCsv,
    RefCsv,
    MergedCsv,
}

impl LogFormat {
    /// Layout whose header matches `fields` exactly.
    pub fn from_header<'a>(fields: impl IntoIterator<Item = &'a str>) -> Option<Self> {
        let fields: Vec<&str> = fields.into_iter().map(str::trim).collect();
        [LogFormat::NodeCsv, LogFormat::RefCsv, LogFormat::MergedCsv]
            .into_iter()
            .find(|f| f.header() == fields.as_slice())
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            LogFormat::NodeCsv => &["datetime", "latitude", "longitude", "node_dba"],
            LogFormat::RefCsv => &["datetime", "latitude", "longitude", "ref_dba"],
            LogFormat::MergedCsv => &["datetime", "latitude", "longitude", "node_dba", "ref_dba"],
        }
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node-csv" | "node" => Ok(LogFormat::NodeCsv),
            "ref-csv" | "ref" => Ok(LogFormat::RefCsv),
            "merged-csv" | "merged" => Ok(LogFormat::MergedCsv),
            _ => Err(Error::Unknown {
                kind: "log format",
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayClass {
    Weekday,
    Weekend,
    Festival,
    Typical,
}

impl DayClass {
    /// Weekday/weekend classification of a local calendar day.
    pub fn from_timestamp(timestamp: i64, utc_offset_seconds: i32) -> Self {
        let local = local_datetime(timestamp, utc_offset_seconds);
        match local.weekday() {
            Weekday::Sat | Weekday::Sun => DayClass::Weekend,
            _ => DayClass::Weekday,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Weekend => "weekend",
            DayClass::Festival => "festival",
            DayClass::Typical => "typical",
        }
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weekday" => Ok(DayClass::Weekday),
            "weekend" => Ok(DayClass::Weekend),
            "festival" => Ok(DayClass::Festival),
            "typical" => Ok(DayClass::Typical),
            _ => Err(Error::Unknown {
                kind: "day class",
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Morning,
    Evening,
}

impl Session {
    pub fn as_str(self) -> &'static str {
        match self {
            Session::Morning => "morning",
            Session::Evening => "evening",
        }
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "morning" => Ok(Session::Morning),
            "evening" => Ok(Session::Evening),
            _ => Err(Error::Unknown {
                kind: "session",
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    #[serde(default)]
    pub route: Option<String>,
    #[serde(default)]
    pub session: Option<Session>,
    #[serde(default)]
    pub day_class: Option<DayClass>,
}

/// A gap in an otherwise 1 Hz log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    /// Timestamp of the last sample before the gap.
    pub after: i64,
    /// Missing seconds.
    pub missing: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub id: String,
    pub format: LogFormat,
    pub samples: Vec<GeoSample>,
    pub meta: CampaignMeta,
}

impl Campaign {
    pub fn new(id: impl Into<String>, format: LogFormat, samples: Vec<GeoSample>) -> Self {
        Self {
            id: id.into(),
            format,
            samples,
            meta: CampaignMeta::default(),
        }
    }

    pub fn with_meta(mut self, meta: CampaignMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Span from first to last timestamp, in seconds.
    pub fn duration(&self) -> i64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0,
        }
    }

    /// Most common positive spacing between consecutive samples.
    pub fn sampling_interval_mode(&self) -> Option<i64> {
        let mut counts: HashMap<i64, usize> = HashMap::new();
        for w in self.samples.windows(2) {
            let dt = w[1].timestamp - w[0].timestamp;
            if dt > 0 {
                *counts.entry(dt).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(dt, _)| dt)
    }

    /// Places where consecutive samples are more than one second apart.
    pub fn gaps(&self) -> Vec<Gap> {
        self.samples
            .windows(2)
            .filter_map(|w| {
                let dt = w[1].timestamp - w[0].timestamp;
                (dt > 1).then_some(Gap {
                    after: w[0].timestamp,
                    missing: dt - 1,
                })
            })
            .collect()
    }

    pub fn paired_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_paired()).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub utc_offset_seconds: i32,
    /// Fraction of rejected rows above which the whole file is refused.
    pub max_reject_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            utc_offset_seconds: DEFAULT_UTC_OFFSET_SECONDS,
            max_reject_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line number in the source file (header is line 1).
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub total_rows: usize,
    pub accepted: usize,
    pub rejects: Vec<Reject>,
}

impl ParseReport {
    /// Line-oriented reject report for the diagnostic stream.
    pub fn write_rejects(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.rejects {
            writeln!(out, "reject {r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCampaign {
    pub campaign: Campaign,
    pub report: ParseReport,
}

/// Parses a campaign log from disk. A `<stem>.meta.json` sidecar next to the
/// file, when present, supplies the campaign metadata.
pub fn parse_log(path: &Path, format: LogFormat, opts: &ParseOptions) -> Result<LoadedCampaign> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut loaded = parse_reader(file, &id, format, opts)?;
    let sidecar = meta_sidecar_path(path);
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        loaded.campaign.meta = serde_json::from_str(&text)?;
    }
    Ok(loaded)
}

/// Reads the header line of a log file and names its layout.
pub fn detect_format(path: &Path) -> Result<LogFormat> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let found = rdr.headers()?.clone();
    LogFormat::from_header(found.iter()).ok_or_else(|| Error::Header {
        expected: "a node, reference or merged log header".into(),
        found: found.iter().collect::<Vec<_>>().join(","),
    })
}

/// Parses a campaign log from any reader.
pub fn parse_reader(
    reader: impl Read,
    id: &str,
    format: LogFormat,
    opts: &ParseOptions,
) -> Result<LoadedCampaign> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let expected = format.header();
    let found = rdr.headers()?.clone();
    if found.len() != expected.len() || found.iter().zip(expected).any(|(f, e)| f != *e) {
        return Err(Error::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }

    let offset = utc_offset(opts.utc_offset_seconds)?;
    let mut report = ParseReport::default();
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        report.total_rows += 1;
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|r| parse_row(&r, format, &offset));
        match parsed {
            Ok(s) => samples.push(s),
            Err(reason) => report.rejects.push(Reject { line, reason }),
        }
    }
    report.accepted = samples.len();

    if report.total_rows == 0 || samples.is_empty() && report.rejects.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    let rejected = report.rejects.len();
    if rejected as f64 > opts.max_reject_fraction * report.total_rows as f64 {
        return Err(Error::TooManyRejects {
            rejected,
            total: report.total_rows,
            first_reason: report.rejects[0].reason.clone(),
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyCampaign);
    }

    samples.sort_by_key(|s| s.timestamp);
    Ok(LoadedCampaign {
        campaign: Campaign::new(id, format, samples),
        report,
    })
}

fn parse_row(
    record: &csv::StringRecord,
    format: LogFormat,
    offset: &FixedOffset,
) -> std::result::Result<GeoSample, String> {
    let expected = format.header().len();
    if record.len() != expected {
        return Err(format!(
            "expected {expected} fields, found {}",
            record.len()
        ));
    }
    let timestamp = parse_timestamp(&record[0], offset)
        .ok_or_else(|| format!("unparseable timestamp `{}`", &record[0]))?;
    let latitude = parse_number(&record[1], "latitude")?;
    let longitude = parse_number(&record[2], "longitude")?;
    if !(-90.0..=90.0).contains(&latitude) {
        return Err("latitude out of range".into());
    }
    if !(-180.0..=180.0).contains(&longitude) {
        return Err("longitude out of range".into());
    }
    let level = parse_level(&record[3])?;
    let ref_level = match format {
        LogFormat::MergedCsv if record[4].is_empty() => None,
        LogFormat::MergedCsv => Some(parse_level(&record[4])?),
        _ => None,
    };
    Ok(GeoSample {
        timestamp,
        latitude,
        longitude,
        node_level: level,
        ref_level,
    })
}

fn parse_number(field: &str, what: &str) -> std::result::Result<f64, String> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("unparseable {what} `{field}`")),
    }
}

fn parse_level(field: &str) -> std::result::Result<f64, String> {
    let v = parse_number(field, "level")?;
    if !(LEVEL_MIN_DBA..=LEVEL_MAX_DBA).contains(&v) {
        return Err("level out of sensor range".into());
    }
    Ok(v)
}

fn utc_offset(seconds: i32) -> Result<FixedOffset> {
    FixedOffset::east_opt(seconds)
        .ok_or_else(|| Error::InvalidParameter(format!("UTC offset {seconds} s out of range")))
}

/// Parses a local `dd:mm:yyyy hh:mm:ss` (or `dd-mm-yyyy hh:mm:ss`) timestamp to
/// UTC epoch seconds.
pub fn parse_timestamp(text: &str, offset: &FixedOffset) -> Option<i64> {
    let naive = TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text.trim(), f).ok())?;
    naive
        .and_local_timezone(*offset)
        .single()
        .map(|dt| dt.timestamp())
}

pub fn local_datetime(timestamp: i64, utc_offset_seconds: i32) -> DateTime<FixedOffset> {
    let offset = FixedOffset::east_opt(utc_offset_seconds).expect("offset validated by caller");
    DateTime::from_timestamp(timestamp, 0)
        .expect("timestamp within chrono range")
        .with_timezone(&offset)
}

/// Seconds since local midnight.
pub fn seconds_of_day(timestamp: i64, utc_offset_seconds: i32) -> u32 {
    (timestamp + utc_offset_seconds as i64).rem_euclid(86_400) as u32
}

pub fn format_timestamp(timestamp: i64, utc_offset_seconds: i32) -> String {
    local_datetime(timestamp, utc_offset_seconds)
        .format(WRITE_FORMAT)
        .to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MergeStats {
    pub paired: usize,
    /// Node seconds with no reference sample at the same second.
    pub node_only: usize,
    /// Reference seconds with no node sample at the same second.
    pub reference_only: usize,
}

/// Pairs a node log with a reference log by identical timestamp.
///
/// Every node sample is kept; the reference level is attached only when the
/// reference log has a sample at exactly that second (the first one, if the
/// reference log repeats a second).
pub fn merge_streams(node: &Campaign, reference: &Campaign) -> Result<(Campaign, MergeStats)> {
    if node.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    let mut by_second: HashMap<i64, f64> = HashMap::with_capacity(reference.len());
    for s in &reference.samples {
        by_second.entry(s.timestamp).or_insert(s.node_level);
    }
    let mut stats = MergeStats::default();
    let mut matched_seconds = std::collections::HashSet::new();
    let samples: Vec<GeoSample> = node
        .samples
        .iter()
        .map(|s| {
            let ref_level = by_second.get(&s.timestamp).copied();
            if ref_level.is_some() {
                stats.paired += 1;
                matched_seconds.insert(s.timestamp);
            } else {
                stats.node_only += 1;
            }
            GeoSample { ref_level, ..*s }
        })
        .collect();
    if stats.paired == 0 {
        return Err(Error::NoTemporalOverlap);
    }
    stats.reference_only = by_second.len() - matched_seconds.len();
    let merged = Campaign {
        id: node.id.clone(),
        format: LogFormat::MergedCsv,
        samples,
        meta: node.meta.clone(),
    };
    Ok((merged, stats))
}

/// Path of the metadata sidecar belonging to a log file.
pub fn meta_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes a campaign in its own log format. Levels are written at 0.1 dB,
/// coordinates at 6 decimals. Non-default metadata goes to a sidecar file.
pub fn write_campaign(c: &Campaign, path: &Path, utc_offset_seconds: i32) -> Result<()> {
    let mut buf = Vec::new();
    write_campaign_to(c, &mut buf, utc_offset_seconds)?;
    crate::fsio::write_atomic(path, &buf)?;
    if c.meta != CampaignMeta::default() {
        let sidecar = meta_sidecar_path(path);
        let text = serde_json::to_string_pretty(&c.meta)?;
        crate::fsio::write_atomic(&sidecar, text.as_bytes())?;
    }
    Ok(())
}

pub fn write_campaign_to(c: &Campaign, out: impl Write, utc_offset_seconds: i32) -> Result<()> {
    if c.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    utc_offset(utc_offset_seconds)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(c.format.header())?;
    for s in &c.samples {
        let mut row = vec![
            format_timestamp(s.timestamp, utc_offset_seconds),
            format!("{:.6}", s.latitude),
            format!("{:.6}", s.longitude),
            format!("{:.1}", s.node_level),
        ];
        if c.format == LogFormat::MergedCsv {
            row.push(s.ref_level.map(|v| format!("{v:.1}")).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_str(text: &str, format: LogFormat) -> Result<LoadedCampaign> {
        parse_reader(text.as_bytes(), "t", format, &ParseOptions::default())
    }

    #[test]
    fn parses_paper_style_row() {
        let text = "datetime,latitude,longitude,node_dba,ref_dba\n\
                    01:05:2024 09:00:00, 17.4454, 78.3489, 78.3, 76.9\n";
        let loaded = parse_str(text, LogFormat::MergedCsv).unwrap();
        let s = loaded.campaign.samples[0];
        // 2024-05-01T09:00:00+05:30
        assert_eq!(s.timestamp, 1_714_534_200);
        assert_eq!(s.latitude, 17.4454);
        assert_eq!(s.longitude, 78.3489);
        assert_eq!(s.node_level, 78.3);
        assert_eq!(s.ref_level, Some(76.9));
    }

    #[test]
    fn utc_offset_is_configurable() {
        let text = "datetime,latitude,longitude,node_dba\n01:05:2024 09:00:00,17.4,78.3,70.0\n";
        let opts = ParseOptions {
            utc_offset_seconds: 0,
            ..Default::default()
        };
        let loaded = parse_reader(text.as_bytes(), "t", LogFormat::NodeCsv, &opts).unwrap();
        assert_eq!(loaded.campaign.samples[0].timestamp, 1_714_554_000);
    }

    #[test]
    fn dash_separated_dates_are_accepted() {
        let offset = FixedOffset::east_opt(0).unwrap();
        assert_eq!(
            parse_timestamp("01-05-2024 09:00:00", &offset),
            parse_timestamp("01:05:2024 09:00:00", &offset)
        );
    }

    #[test]
    fn level_above_range_is_rejected() {
        let text = "datetime,latitude,longitude,node_dba\n\
                    01:05:2024 09:00:00,17.4,78.3,70.0\n\
                    01:05:2024 09:00:01,17.4,78.3,140.0\n\
                    01:05:2024 09:00:02,17.4,78.3,71.0\n";
        let loaded = parse_str(text, LogFormat::NodeCsv).unwrap();
        assert_eq!(loaded.report.rejects.len(), 1);
        assert_eq!(loaded.report.rejects[0].reason, "level out of sensor range");
        assert_eq!(loaded.report.rejects[0].line, 3);
    }

    #[test]
    fn malformed_date_row_is_rejected_not_fatal() {
        let text = "datetime,latitude,longitude,node_dba\n\
                    01:05:2024 09:00:00,17.4,78.3,70.0\n\
                    32:13:2024 09:00:01,17.4,78.3,70.5\n\
                    01:05:2024 09:00:02,17.4,78.3,71.0\n";
        let loaded = parse_str(text, LogFormat::NodeCsv).unwrap();
        assert_eq!(loaded.campaign.len(), 2);
        assert_eq!(loaded.report.rejects.len(), 1);
        assert_eq!(loaded.report.total_rows, 3);
        assert!(loaded.report.rejects[0].reason.contains("timestamp"));
    }

    #[test]
    fn majority_rejects_abort() {
        let text = "datetime,latitude,longitude,node_dba\n\
                    01:05:2024 09:00:00,17.4,78.3,170.0\n\
                    01:05:2024 09:00:01,95.0,78.3,70.0\n\
                    01:05:2024 09:00:02,17.4,78.3,71.0\n";
        assert!(matches!(
            parse_str(text, LogFormat::NodeCsv),
            Err(Error::TooManyRejects {
                rejected: 2,
                total: 3,
                ..
            })
        ));
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let text = "time,lat,lon,level\n01:05:2024 09:00:00,17.4,78.3,70.0\n";
        assert!(matches!(
            parse_str(text, LogFormat::NodeCsv),
            Err(Error::Header { .. })
        ));
    }

    #[test]
    fn format_from_header() {
        assert_eq!(
            LogFormat::from_header(["datetime", "latitude", "longitude", "node_dba", "ref_dba"]),
            Some(LogFormat::MergedCsv)
        );
        assert_eq!(
            LogFormat::from_header(["datetime", "latitude", "longitude", " ref_dba"]),
            Some(LogFormat::RefCsv)
        );
        assert_eq!(LogFormat::from_header(["time", "level"]), None);
    }

    #[test]
    fn header_only_file_is_empty() {
        let text = "datetime,latitude,longitude,node_dba\n";
        assert!(matches!(
            parse_str(text, LogFormat::NodeCsv),
            Err(Error::EmptyCampaign)
        ));
    }

    #[test]
    fn crlf_input_parses() {
        let text = "datetime,latitude,longitude,node_dba\r\n01:05:2024 09:00:00,17.4,78.3,70.0\r\n";
        assert_eq!(
            parse_str(text, LogFormat::NodeCsv).unwrap().campaign.len(),
            1
        );
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let text = "datetime,latitude,longitude,node_dba\n\
                    01:05:2024 09:00:05,17.4,78.3,70.0\n\
                    01:05:2024 09:00:01,17.4,78.3,71.0\n";
        let c = parse_str(text, LogFormat::NodeCsv).unwrap().campaign;
        assert!(c.samples[0].timestamp < c.samples[1].timestamp);
        assert_eq!(
            c.gaps(),
            vec![Gap {
                after: c.samples[0].timestamp,
                missing: 3
            }]
        );
    }

    fn stream(ts: &[i64], level: f64, format: LogFormat) -> Campaign {
        let samples = ts
            .iter()
            .map(|&t| GeoSample {
                timestamp: t,
                latitude: 17.0,
                longitude: 78.0,
                node_level: level + t as f64,
                ref_level: None,
            })
            .collect();
        Campaign::new("s", format, samples)
    }

    #[test]
    fn merge_pairs_on_identical_seconds() {
        let node = stream(&[0, 1, 2], 60.0, LogFormat::NodeCsv);
        let reference = stream(&[1, 2, 3], 70.0, LogFormat::RefCsv);
        let (m, stats) = merge_streams(&node, &reference).unwrap();
        assert_eq!(m.samples[0].ref_level, None);
        assert_eq!(m.samples[1].ref_level, Some(71.0));
        assert_eq!(m.samples[2].ref_level, Some(72.0));
        assert_eq!(
            stats,
            MergeStats {
                paired: 2,
                node_only: 1,
                reference_only: 1
            }
        );
        assert_eq!(m.format, LogFormat::MergedCsv);
    }

    #[test]
    fn merge_identical_sets_pairs_everything() {
        let node = stream(&[5, 6, 7], 60.0, LogFormat::NodeCsv);
        let reference = stream(&[5, 6, 7], 70.0, LogFormat::RefCsv);
        let (m, _) = merge_streams(&node, &reference).unwrap();
        assert_eq!(m.paired_count(), 3);
    }

    #[test]
    fn merge_disjoint_ranges_fails() {
        let node = stream(&[0, 1], 60.0, LogFormat::NodeCsv);
        let reference = stream(&[10, 11], 70.0, LogFormat::RefCsv);
        let err = merge_streams(&node, &reference).unwrap_err();
        assert_eq!(
            err.to_string(),
            "no temporal overlap between node and reference streams"
        );
    }

    #[test]
    fn writing_empty_campaign_fails() {
        let c = Campaign::new("e", LogFormat::NodeCsv, vec![]);
        assert!(matches!(
            write_campaign_to(&c, Vec::new(), 0),
            Err(Error::EmptyCampaign)
        ));
    }

    #[test]
    fn single_sample_round_trip() {
        let c = Campaign::new(
            "t",
            LogFormat::MergedCsv,
            vec![GeoSample {
                timestamp: 1_714_534_200,
                latitude: 17.4454,
                longitude: 78.3489,
                node_level: 78.3,
                ref_level: Some(76.9),
            }],
        );
        let mut buf = Vec::new();
        write_campaign_to(&c, &mut buf, DEFAULT_UTC_OFFSET_SECONDS).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "01:05:2024 09:00:00,17.445400,78.348900,78.3,76.9"
        );
        let back = parse_str(&text, LogFormat::MergedCsv).unwrap().campaign;
        assert_eq!(back.samples, c.samples);
    }

    fn arb_sample() -> impl Strategy<Value = GeoSample> {
        (
            0i64..2_000_000_000,
            -90_000_000i64..=90_000_000,
            -180_000_000i64..=180_000_000,
            300i64..=1300,
            proptest::option::of(300i64..=1300),
        )
            .prop_map(|(t, lat, lon, l, r)| GeoSample {
                timestamp: t,
                latitude: lat as f64 / 1e6,
                longitude: lon as f64 / 1e6,
                node_level: l as f64 / 10.0,
                ref_level: r.map(|r| r as f64 / 10.0),
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(mut samples in proptest::collection::vec(arb_sample(), 1..50)) {
            samples.sort_by_key(|s| s.timestamp);
            let c = Campaign::new("p", LogFormat::MergedCsv, samples);
            let mut buf = Vec::new();
            write_campaign_to(&c, &mut buf, DEFAULT_UTC_OFFSET_SECONDS).unwrap();
            let back = parse_reader(&buf[..], "p", LogFormat::MergedCsv, &ParseOptions::default())
                .unwrap();
            prop_assert_eq!(back.report.rejects.len(), 0);
            prop_assert_eq!(back.campaign.samples, c.samples);
        }

        #[test]
        fn rejects_plus_accepted_equals_rows(levels in proptest::collection::vec(0.0f64..200.0, 1..40)) {
            let mut text = String::from("datetime,latitude,longitude,node_dba\n");
            for (i, l) in levels.iter().enumerate() {
                text.push_str(&format!("01:05:2024 09:{:02}:{:02},17.4,78.3,{l:.1}\n", i / 60, i % 60));
            }
            let opts = ParseOptions { max_reject_fraction: 1.0, ..Default::default() };
            match parse_reader(text.as_bytes(), "p", LogFormat::NodeCsv, &opts) {
                Ok(loaded) => prop_assert_eq!(
                    loaded.report.accepted + loaded.report.rejects.len(),
                    loaded.report.total_rows
                ),
                Err(Error::EmptyCampaign) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }

        #[test]
        fn merge_never_invents_reference_levels(
            node_ts in proptest::collection::btree_set(0i64..200, 1..60),
            ref_ts in proptest::collection::btree_set(0i64..200, 1..60),
        ) {
            let node = stream(&node_ts.iter().copied().collect::<Vec<_>>(), 60.0, LogFormat::NodeCsv);
            let reference = stream(&ref_ts.iter().copied().collect::<Vec<_>>(), 40.0, LogFormat::RefCsv);
            if let Ok((m, stats)) = merge_streams(&node, &reference) {
                prop_assert_eq!(m.len(), node.len());
                for s in &m.samples {
                    if let Some(r) = s.ref_level {
                        let src = reference.samples.iter().find(|x| x.timestamp == s.timestamp).unwrap();
                        prop_assert_eq!(r, src.node_level);
                    } else {
                        prop_assert!(!ref_ts.contains(&s.timestamp));
                    }
                }
                prop_assert_eq!(stats.paired + stats.node_only, node.len());
            } else {
                prop_assert!(node_ts.is_disjoint(&ref_ts));
            }
        }
    }
}
