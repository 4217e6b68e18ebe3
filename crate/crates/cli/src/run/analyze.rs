use std::collections::BTreeMap;
use std::path::PathBuf;

use noisecal::analytics::{
    compare_distributions, label_campaign, standards_check_samples, summarize, temporal_profile,
    velocity_noise_trend, LabeledLevels, VelocityTrend,
};
use noisecal::preprocess::AlignedSeries;
use noisecal::preprocess::DEFAULT_WINDOW;
use serde::{Deserialize, Serialize};

use super::map::source;
use super::{csv_bytes, csv_table, num, opt};
use crate::args::AnalyzeArgs;
use crate::config::{existing, merge, parse, required, speed_cap, utc_offset, AnalyzeSettings};
use crate::error::{CliError, CliResult};
use crate::levels::{leveled, load_log, load_model, velocity_windows, LevelKind};
use crate::manifest::RunDir;

pub const SKIPPED_NO_VELOCITY: &str = "skipped: no velocity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyzeRunSettings {
    pub inputs: Vec<PathBuf>,
    pub model: Option<PathBuf>,
    pub level: LevelKind,
    pub utc_offset: i32,
    pub speed_cap: f64,
    pub window: u32,
    pub analyze: AnalyzeSettings,
}

impl AnalyzeRunSettings {
    pub fn resolve(a: &AnalyzeArgs) -> CliResult<Self> {
        if a.input.is_empty() {
            return Err(CliError::usage("--input is required"));
        }
        let inputs = a
            .input
            .iter()
            .map(|p| existing("input", p))
            .collect::<CliResult<_>>()?;
        let level = match &a.level {
            Some(l) => parse("level", l)?,
            None if a.model.is_some() => LevelKind::Calibrated,
            None => LevelKind::Reference,
        };
        if (level == LevelKind::Calibrated) != a.model.is_some() {
            return Err(CliError::usage(
                "--model goes with --level calibrated, and only with it",
            ));
        }
        let window = a.window.unwrap_or(DEFAULT_WINDOW);
        if window == 0 {
            return Err(CliError::usage("--window must be at least 1"));
        }
        Ok(Self {
            inputs,
            model: a
                .model
                .as_deref()
                .map(|p| existing("model", p))
                .transpose()?,
            level,
            utc_offset: utc_offset(a.utc_offset)?,
            speed_cap: speed_cap(a.speed_cap)?,
            window,
            analyze: a.analyze.resolve()?,
        })
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut v = self.inputs.clone();
        v.extend(self.model.clone());
        v
    }
}

pub struct AnalyzeOutput {
    pub groups: Vec<LabeledLevels>,
    pub trend: Result<VelocityTrend, String>,
    /// `(group, period, exceeding blocks, blocks)`
    pub exceedances: Vec<(String, String, usize, usize)>,
}

pub fn analyze(s: &AnalyzeRunSettings, run: &mut RunDir) -> CliResult<AnalyzeOutput> {
    let cfg = &s.analyze;
    let model = s.model.as_deref().map(load_model).transpose()?;
    let src = source(s.level, model.as_ref());
    let mut by_group: BTreeMap<String, Vec<(i64, f64)>> = BTreeMap::new();
    let mut windows: Vec<AlignedSeries> = Vec::new();
    for path in &s.inputs {
        let c = load_log(path, None, s.utc_offset)?;
        let c = leveled(&c, &src, s.speed_cap)?;
        if c.is_empty() {
            continue;
        }
        let l = label_campaign(&c, cfg.group_by, s.utc_offset, |x| Some(x.node_level))?;
        by_group.entry(l.group).or_default().extend(l.levels);
        windows.extend(velocity_windows(&c, s.window, s.speed_cap)?);
    }
    if by_group.is_empty() {
        return Err(CliError::runtime(format!(
            "no {} levels in the inputs",
            level_name(s.level)
        )));
    }
    let groups: Vec<LabeledLevels> = by_group
        .into_iter()
        .map(|(group, mut levels)| {
            levels.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            LabeledLevels { group, levels }
        })
        .collect();

    let profiles = temporal_profile(&groups, cfg.bucket, s.utc_offset)?;
    run.write("profiles.csv", &csv_bytes(&profiles)?)?;

    let values = |g: &LabeledLevels| g.levels.iter().map(|l| l.1).collect::<Vec<f64>>();
    let summaries = groups
        .iter()
        .map(|g| summarize(&g.group, &values(g)))
        .collect::<noisecal::Result<Vec<_>>>()?;
    run.write("summaries.csv", &csv_bytes(&summaries)?)?;

    let mut comparisons = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            let c = compare_distributions(&a.group, &values(a), &b.group, &values(b))?;
            comparisons.push(vec![
                c.a.label.clone(),
                c.b.label.clone(),
                num(c.a.mean),
                num(c.b.mean),
                num(c.mean_diff),
                num(c.a.variance),
                num(c.b.variance),
                opt(c.var_ratio),
            ]);
        }
    }
    run.write(
        "comparisons.csv",
        &csv_table(
            &[
                "group_a",
                "group_b",
                "mean_a",
                "mean_b",
                "mean_diff",
                "variance_a",
                "variance_b",
                "var_ratio",
            ],
            &comparisons,
        )?,
    )?;

    let mut standards = Vec::new();
    let mut exceedances = Vec::new();
    for g in &groups {
        for &period in &cfg.periods {
            let r = standards_check_samples(
                &g.levels,
                cfg.zone,
                period,
                cfg.leq_interval,
                cfg.day_night,
                s.utc_offset,
            )?;
            for item in &r.items {
                standards.push(vec![
                    g.group.clone(),
                    r.zone.to_string(),
                    r.period.to_string(),
                    num(r.limit),
                    item.label.clone(),
                    num(item.level),
                    num(item.count),
                    num(item.exceeds),
                ]);
            }
            exceedances.push((
                g.group.clone(),
                period.to_string(),
                r.exceedances,
                r.items.len(),
            ));
        }
    }
    run.write(
        "standards.csv",
        &csv_table(
            &[
                "group", "zone", "period", "limit", "interval", "leq", "count", "exceeds",
            ],
            &standards,
        )?,
    )?;

    let moving = windows
        .iter()
        .any(|w| w.velocity().is_some_and(|v| v > 0.0));
    let trend = if moving {
        velocity_noise_trend(&windows, cfg.velocity_bin, |w| w.ref_mean)
            .map_err(|e| format!("skipped: {e}"))
    } else {
        Err(SKIPPED_NO_VELOCITY.to_string())
    };
    let row = match &trend {
        Ok(t) => vec![
            "ok".to_string(),
            num(t.n),
            num(t.slope),
            num(t.intercept),
            num(t.slope_ci.0),
            num(t.slope_ci.1),
            num(t.pearson_r),
            num(t.p_value),
        ],
        Err(status) => {
            let mut v = vec![status.clone()];
            v.extend(std::iter::repeat_n(String::new(), 7));
            v
        }
    };
    run.write(
        "trend.csv",
        &csv_table(
            &[
                "status",
                "n",
                "slope",
                "intercept",
                "slope_ci_low",
                "slope_ci_high",
                "pearson_r",
                "p_value",
            ],
            &[row],
        )?,
    )?;
    if let Ok(t) = &trend {
        run.write("trend_bins.csv", &csv_bytes(&t.bins)?)?;
    }

    Ok(AnalyzeOutput {
        groups,
        trend,
        exceedances,
    })
}

fn level_name(k: LevelKind) -> &'static str {
    match k {
        LevelKind::Node => "node",
        LevelKind::Reference => "reference",
        LevelKind::Calibrated => "calibrated",
    }
}

pub fn print_summary(s: &AnalyzeRunSettings, out: &AnalyzeOutput) {
    println!(
        "analyze ({} levels, zone {}):",
        level_name(s.level),
        s.analyze.zone
    );
    for g in &out.groups {
        let mean = g.levels.iter().map(|l| l.1).sum::<f64>() / g.levels.len() as f64;
        println!(
            "  {:<24} n = {:>7}  mean {:.2} dBA",
            g.group,
            g.levels.len(),
            mean
        );
    }
    for (group, period, over, total) in &out.exceedances {
        println!("  {group} {period}: {over} of {total} Leq blocks above the limit");
    }
    match &out.trend {
        Ok(t) => println!(
            "  velocity trend: {:.3} dBA per m/s (95 % CI {:.3}..{:.3}, p = {:.2e}, n = {})",
            t.slope, t.slope_ci.0, t.slope_ci.1, t.p_value, t.n
        ),
        Err(status) => println!("  velocity trend: {status}"),
    }
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let a = merge(args, args.config.as_deref())?;
    let s = AnalyzeRunSettings::resolve(&a)?;
    let out = required("out", &a.out)?;
    let mut run = RunDir::create(&out)?;
    let result = analyze(&s, &mut run)?;
    let manifest = run.finish("analyze", None, &s, &s.input_paths())?;
    print_summary(&s, &result);
    println!("manifest: {}", manifest.display());
    Ok(())
}
