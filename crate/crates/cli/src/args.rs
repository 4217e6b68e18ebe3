use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Calibrate low-cost mobile noise sensors and analyse what they record.
#[derive(Debug, Parser)]
#[command(name = "noisecal", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a synthetic node/reference campaign.
    Gen(GenArgs),
    /// Preprocess a campaign and cross-validate calibration models.
    Calibrate(CalibrateArgs),
    /// Bin levels into a metric grid and export GeoJSON and hotspots.
    Map(MapArgs),
    /// Temporal profiles, group comparisons, velocity trend and limit checks.
    Analyze(AnalyzeArgs),
    /// gen (optional), calibrate, map and analyze in one run directory.
    Pipeline(PipelineArgs),
}

// Every option is optional here so that a JSON config file can supply it;
// defaults are applied when the merged options are resolved.

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PrepOpts {
    /// Averaging window, seconds [default: 10]
    #[arg(long)]
    pub window: Option<u32>,
    /// IQR fence factor [default: 1.5]
    #[arg(long)]
    pub fence_factor: Option<f64>,
    /// Largest lag searched, seconds [default: 120]
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Use this lag instead of estimating it (positive: node trails reference)
    #[arg(long, allow_negative_numbers = true)]
    pub lag: Option<i64>,
    /// Minimum paired samples per window [default: 5]
    #[arg(long)]
    pub min_count: Option<usize>,
    /// arithmetic or energetic [default: arithmetic]
    #[arg(long)]
    pub averaging: Option<String>,
    /// Fixes implying a faster speed are ignored, m/s [default: 42]
    #[arg(long)]
    pub speed_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ModelOpts {
    /// Comma-separated families (SLR, MLR, PR, SR, SVR, DT, RFR) or "all" [default: all]
    #[arg(long)]
    pub family: Option<String>,
    /// Cross-validation folds [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// shuffled or blocked [default: shuffled]
    #[arg(long)]
    pub fold_mode: Option<String>,
    /// Add window velocity as a second feature
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub velocity: Option<bool>,
    /// Tree depths, one report row each [default: 3,4,5]
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    /// Trees per forest [default: 100]
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Minimum samples per leaf [default: 5]
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Features tried per forest split [default: max(1, ceil(p/3))]
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Polynomial degree [default: 4]
    #[arg(long)]
    pub degree: Option<usize>,
    /// SVR box constraint [default: 10]
    #[arg(long)]
    pub svr_c: Option<f64>,
    /// SVR tube half-width, dBA [default: 0.5]
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    /// RBF gamma [default: 1 / (p * var(X))]
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    /// SMO iteration cap [default: 100000]
    #[arg(long)]
    pub svr_max_iter: Option<usize>,
    /// Also score this previously saved model on the data
    #[arg(long)]
    pub transfer_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct MapOpts {
    /// Cell edge, metres [default: 100]
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// mean or max [default: mean]
    #[arg(long)]
    pub statistic: Option<String>,
    /// Hotspot threshold, dBA [default: 90]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Band edges for the GeoJSON, dBA [default: 75,90]
    #[arg(long, value_delimiter = ',')]
    pub bands: Vec<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct AnalyzeOpts {
    /// day-class, day-class-session, route or all [default: day-class-session]
    #[arg(long)]
    pub group_by: Option<String>,
    /// Time-of-day profile bucket, seconds [default: 3600]
    #[arg(long)]
    pub bucket: Option<u32>,
    /// industrial, commercial, residential or silence [default: commercial]
    #[arg(long)]
    pub zone: Option<String>,
    /// day, night or both [default: both]
    #[arg(long)]
    pub period: Option<String>,
    /// Leq block length for the limit check, seconds [default: 3600]
    #[arg(long)]
    pub leq_interval: Option<u32>,
    /// Velocity bin width, m/s [default: 1]
    #[arg(long)]
    pub velocity_bin: Option<f64>,
    /// First daytime hour [default: 6]
    #[arg(long)]
    pub day_start: Option<u32>,
    /// First night-time hour [default: 22]
    #[arg(long)]
    pub day_end: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct GenArgs {
    /// JSON file supplying any of these options; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// lab, mobile or festival [default: mobile]
    #[arg(long)]
    pub scenario: Option<String>,
    /// Seconds [default: the scenario's own]
    #[arg(long)]
    pub duration: Option<u32>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct CalibrateArgs {
    /// JSON file supplying any of these options; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Node log
    #[arg(long)]
    pub node: Option<PathBuf>,
    /// Reference log
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Already merged log, instead of --node and --reference
    #[arg(long)]
    pub merged: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fold and forest seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Offset of the logs' local time from UTC, seconds [default: 19800]
    #[arg(long, allow_negative_numbers = true)]
    pub utc_offset: Option<i32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct MapArgs {
    /// JSON file supplying any of these options; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Log file (node, reference or merged); repeatable
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Calibrate node levels with this model
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Map levels as logged, without a model
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub raw: Option<bool>,
    /// With --raw: node or reference [default: reference]
    #[arg(long)]
    pub level: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Offset of the logs' local time from UTC, seconds [default: 19800]
    #[arg(long, allow_negative_numbers = true)]
    pub utc_offset: Option<i32>,
    /// Speed cap for the velocity feature, m/s [default: 42]
    #[arg(long)]
    pub speed_cap: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapOpts,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct AnalyzeArgs {
    /// JSON file supplying any of these options; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Log file (node, reference or merged); repeatable
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Calibrate node levels with this model
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// node, reference or calibrated [default: calibrated with --model, else reference]
    #[arg(long)]
    pub level: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Offset of the logs' local time from UTC, seconds [default: 19800]
    #[arg(long, allow_negative_numbers = true)]
    pub utc_offset: Option<i32>,
    /// Speed cap, m/s [default: 42]
    #[arg(long)]
    pub speed_cap: Option<f64>,
    /// Window for the velocity trend, seconds [default: 10]
    #[arg(long)]
    pub window: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub analyze: AnalyzeOpts,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PipelineArgs {
    /// JSON file supplying any of these options; flags take precedence
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Scenario to generate when no logs are given [default: mobile]
    #[arg(long)]
    pub scenario: Option<String>,
    /// Generated campaign length, seconds [default: the scenario's own]
    #[arg(long)]
    pub duration: Option<u32>,
    /// Node log
    #[arg(long)]
    pub node: Option<PathBuf>,
    /// Reference log
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Already merged log
    #[arg(long)]
    pub merged: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Offset of the logs' local time from UTC, seconds [default: 19800]
    #[arg(long, allow_negative_numbers = true)]
    pub utc_offset: Option<i32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub prep: PrepOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub map: MapOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub analyze: AnalyzeOpts,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flag_without_value_is_true() {
        let cli =
            Cli::try_parse_from(["noisecal", "calibrate", "--velocity", "--folds", "5"]).unwrap();
        let Command::Calibrate(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.model.velocity, Some(true));
        assert_eq!(a.model.folds, Some(5));
    }

    #[test]
    fn negative_lag_is_a_value() {
        let cli = Cli::try_parse_from(["noisecal", "calibrate", "--lag", "-4"]).unwrap();
        let Command::Calibrate(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.prep.lag, Some(-4));
    }
}
