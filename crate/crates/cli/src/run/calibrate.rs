use std::path::PathBuf;

use noisecal::calibrate::{
    cross_validate_with, fit, transfer_evaluate, Dataset, EvalReport, ModelSpec,
};
use noisecal::ingest::{LogFormat, MergeStats};
use noisecal::pipeline::{prepare, prepare_merged, Prepared};
use noisecal::preprocess::{write_series_csv, Fences, LagEstimate};
use serde::{Deserialize, Serialize};

use super::{csv_table, json_bytes, num, opt};
use crate::args::CalibrateArgs;
use crate::config::{existing, merge, required, utc_offset, ModelSettings, PrepSettings};
use crate::error::{CliError, CliResult};
use crate::levels::{load_log, load_model};
use crate::manifest::RunDir;

pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inputs {
    Pair { node: PathBuf, reference: PathBuf },
    Merged(PathBuf),
}

impl Inputs {
    pub fn resolve(
        node: &Option<PathBuf>,
        reference: &Option<PathBuf>,
        merged: &Option<PathBuf>,
    ) -> CliResult<Self> {
        match (node, reference, merged) {
            (None, None, Some(m)) => Ok(Inputs::Merged(existing("merged", m)?)),
            (Some(n), Some(r), None) => Ok(Inputs::Pair {
                node: existing("node", n)?,
                reference: existing("reference", r)?,
            }),
            _ => Err(CliError::usage(
                "give either --node and --reference, or --merged",
            )),
        }
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        match self {
            Inputs::Pair { node, reference } => vec![node.clone(), reference.clone()],
            Inputs::Merged(m) => vec![m.clone()],
        }
    }

    /// The log that carries the node levels.
    pub fn node_log(&self) -> &PathBuf {
        match self {
            Inputs::Pair { node, .. } => node,
            Inputs::Merged(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CalibrateSettings {
    pub inputs: Inputs,
    pub seed: u64,
    pub utc_offset: i32,
    pub preprocess: PrepSettings,
    pub model: ModelSettings,
}

impl CalibrateSettings {
    pub fn resolve(a: &CalibrateArgs) -> CliResult<Self> {
        Ok(Self {
            inputs: Inputs::resolve(&a.node, &a.reference, &a.merged)?,
            seed: a.seed.unwrap_or(0),
            utc_offset: utc_offset(a.utc_offset)?,
            preprocess: a.prep.resolve()?,
            model: a.model.resolve()?,
        })
    }
}

/// One report row.
#[derive(Debug, Clone)]
pub struct Row {
    pub model: String,
    pub family: String,
    pub status: String,
    pub report: Option<EvalReport>,
    spec: Option<ModelSpec>,
}

pub struct CalibrateOutput {
    pub rows: Vec<Row>,
    pub best: Option<(String, PathBuf)>,
    pub prepared: Prepared,
}

#[derive(Serialize)]
struct PreprocessSummary<'a> {
    input_samples: usize,
    merge: MergeStats,
    lag: i64,
    lag_estimate: Option<LagEstimate>,
    node_outliers: usize,
    ref_outliers: usize,
    node_fences: Fences,
    ref_fences: Fences,
    windows: usize,
    velocity_windows: usize,
    implausible_fixes: Option<usize>,
    features: &'a [String],
}

fn load(s: &CalibrateSettings) -> CliResult<Prepared> {
    let cfg = s.preprocess.pipeline();
    let prepared = match &s.inputs {
        Inputs::Pair { node, reference } => {
            let n = load_log(node, Some(LogFormat::NodeCsv), s.utc_offset)?;
            let r = load_log(reference, Some(LogFormat::RefCsv), s.utc_offset)?;
            prepare(&n, &r, &cfg)?
        }
        Inputs::Merged(m) => {
            let c = load_log(m, Some(LogFormat::MergedCsv), s.utc_offset)?;
            prepare_merged(c, MergeStats::default(), &cfg)?
        }
    };
    Ok(prepared)
}

fn dataset(s: &CalibrateSettings, p: &Prepared) -> CliResult<Dataset> {
    if s.model.velocity {
        if p.augmented.is_empty() {
            return Err(CliError::runtime(
                "no window has a velocity; the track has too few usable fixes",
            ));
        }
        Ok(p.velocity_dataset()?)
    } else {
        Ok(p.plain_dataset()?)
    }
}

/// Cross-validates every configured model, refits the best one on all
/// windows and writes the report, model, series and preprocessing summary.
pub fn calibrate(s: &CalibrateSettings, run: &mut RunDir) -> CliResult<CalibrateOutput> {
    let prepared = load(s)?;
    let d = dataset(s, &prepared)?;
    let m = &s.model;
    if d.n() < m.folds {
        return Err(CliError::runtime(format!(
            "{} windows cannot fill {} folds",
            d.n(),
            m.folds
        )));
    }

    let mut rows = Vec::new();
    for spec in m.specs(s.seed) {
        let label = spec.label();
        let row = match cross_validate_with(&d, &spec, m.folds, s.seed, m.fold_mode) {
            Ok(cv) => Row {
                model: label,
                family: spec.family().to_string(),
                status: "ok".into(),
                report: Some(cv.report),
                spec: Some(spec),
            },
            Err(e) => {
                eprintln!("{label}: {e}");
                Row {
                    model: label,
                    family: spec.family().to_string(),
                    status: format!("failed: {e}"),
                    report: None,
                    spec: None,
                }
            }
        };
        rows.push(row);
    }
    if let Some(path) = &m.transfer_model {
        let model = load_model(path)?;
        let report = transfer_evaluate(&model, &d)
            .map_err(|e| CliError::from(e).context(format!("transfer model {}", path.display())))?;
        rows.push(Row {
            model: format!("{} (transfer)", model.spec.label()),
            family: model.family().to_string(),
            status: "ok".into(),
            report: Some(report),
            spec: None,
        });
    }

    let features = d.column_names().join("+");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.model.clone(),
                r.family.clone(),
                features.clone(),
                r.status.clone(),
            ];
            match &r.report {
                Some(rep) => {
                    let p = &rep.pooled;
                    v.extend([
                        num(p.n),
                        opt(p.r2),
                        num(p.mae),
                        num(p.rmse),
                        opt(p.pearson_r),
                        opt(p.p_value),
                    ]);
                }
                None => v.extend(std::iter::repeat_n(String::new(), 6)),
            }
            v
        })
        .collect();
    run.write(
        REPORT_FILE,
        &csv_table(
            &[
                "model",
                "family",
                "features",
                "status",
                "n",
                "r2",
                "mae",
                "rmse",
                "pearson_r",
                "p_value",
            ],
            &table,
        )?,
    )?;

    // ties keep report order; an undefined r2 ranks last
    let mut best: Option<(&ModelSpec, &str, f64)> = None;
    for r in &rows {
        if let (Some(spec), Some(rep)) = (&r.spec, &r.report) {
            let score = rep.pooled.r2.unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, _, b)| score > b) {
                best = Some((spec, &r.model, score));
            }
        }
    }
    let best = match best {
        Some((spec, label, _)) => {
            let model = fit(spec, &d).map_err(|e| CliError::from(e).context(label))?;
            let path = run.write(MODEL_FILE, model.to_json()?.as_bytes())?;
            Some((label.to_string(), path))
        }
        None => None,
    };

    let series = if m.velocity {
        &prepared.augmented
    } else {
        prepared.series()
    };
    let mut buf = Vec::new();
    write_series_csv(series, &mut buf)?;
    run.write("series.csv", &buf)?;

    let o = &prepared.outcome;
    let summary = PreprocessSummary {
        input_samples: o.input_samples,
        merge: prepared.merge_stats,
        lag: o.lag,
        lag_estimate: o.lag_estimate,
        node_outliers: o.node_outliers,
        ref_outliers: o.ref_outliers,
        node_fences: o.node_fences,
        ref_fences: o.ref_fences,
        windows: o.series.len(),
        velocity_windows: prepared.augmented.len(),
        implausible_fixes: prepared.velocity.as_ref().map(|v| v.implausible()),
        features: d.column_names(),
    };
    run.write("preprocess.json", &json_bytes(&summary)?)?;

    Ok(CalibrateOutput {
        rows,
        best,
        prepared,
    })
}

pub fn print_summary(out: &CalibrateOutput) {
    let o = &out.prepared.outcome;
    println!(
        "preprocess: {} samples, lag {} s, {} + {} outliers, {} windows",
        o.input_samples,
        o.lag,
        o.node_outliers,
        o.ref_outliers,
        o.series.len()
    );
    println!(
        "{:<22} {:>6} {:>9} {:>8} {:>8}",
        "model", "n", "r2", "mae", "rmse"
    );
    for r in &out.rows {
        match &r.report {
            Some(rep) => println!(
                "{:<22} {:>6} {:>9.4} {:>8.3} {:>8.3}",
                r.model,
                rep.pooled.n,
                noisecal::calibrate::OptionalStat(rep.pooled.r2),
                rep.pooled.mae,
                rep.pooled.rmse
            ),
            None => println!("{:<22} {}", r.model, r.status),
        }
    }
    match &out.best {
        Some((label, path)) => println!("best: {label} -> {}", path.display()),
        None => println!("best: none (every model failed)"),
    }
}

pub fn run(args: &CalibrateArgs) -> CliResult<()> {
    let a = merge(args, args.config.as_deref())?;
    let s = CalibrateSettings::resolve(&a)?;
    let out = required("out", &a.out)?;
    let mut run = RunDir::create(&out)?;
    let result = calibrate(&s, &mut run)?;
    let manifest = run.finish("calibrate", Some(s.seed), &s, &s.inputs.paths())?;
    print_summary(&result);
    println!("manifest: {}", manifest.display());
    if result.best.is_none() {
        return Err(CliError::runtime("no model could be cross-validated"));
    }
    Ok(())
}
