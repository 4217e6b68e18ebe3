use serde::{Deserialize, Serialize};

use super::analyze::{self, AnalyzeRunSettings};
use super::calibrate::{self, CalibrateSettings, Inputs, MODEL_FILE};
use super::gen::{self, GenSettings};
use super::map::{self, MapRunSettings};
use crate::args::PipelineArgs;
use crate::config::{merge, required, utc_offset, AnalyzeSettings, MapSettings};
use crate::error::{CliError, CliResult};
use crate::levels::LevelKind;
use crate::manifest::{RunDir, MANIFEST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PipelineSettings {
    /// Set when the campaign is generated rather than read.
    pub generate: Option<GenSettings>,
    pub calibrate: CalibrateSettings,
    pub map: MapSettings,
    pub analyze: AnalyzeSettings,
}

impl PipelineSettings {
    pub fn resolve(a: &PipelineArgs) -> CliResult<Self> {
        let given = a.node.is_some() || a.reference.is_some() || a.merged.is_some();
        let generate = if given {
            if a.scenario.is_some() || a.duration.is_some() {
                return Err(CliError::usage(
                    "--scenario and --duration only apply when no logs are given",
                ));
            }
            None
        } else {
            Some(GenSettings::resolve(
                a.scenario.as_deref(),
                a.duration,
                a.seed,
            )?)
        };
        let inputs = if given {
            Inputs::resolve(&a.node, &a.reference, &a.merged)?
        } else {
            // filled in once the campaign exists
            Inputs::Merged(Default::default())
        };
        Ok(Self {
            generate,
            calibrate: CalibrateSettings {
                inputs,
                seed: a.seed.unwrap_or(0),
                utc_offset: utc_offset(a.utc_offset)?,
                preprocess: a.prep.resolve()?,
                model: a.model.resolve()?,
            },
            map: a.map.resolve()?,
            analyze: a.analyze.resolve()?,
        })
    }
}

pub fn run(args: &PipelineArgs) -> CliResult<()> {
    let a = merge(args, args.config.as_deref())?;
    let mut s = PipelineSettings::resolve(&a)?;
    let out = required("out", &a.out)?;
    let mut top = RunDir::create(&out)?;

    if let Some(g) = &s.generate {
        let mut run = RunDir::create(&out.join("gen"))?;
        let generated = gen::generate(g, &mut run).map_err(|e| e.context("gen"))?;
        run.finish("gen", Some(g.seed), g, &[])?;
        top.record(&format!("gen/{MANIFEST}"));
        s.calibrate.inputs = Inputs::Pair {
            node: generated.node,
            reference: generated.reference,
        };
        s.calibrate.utc_offset = generated.utc_offset;
        println!("gen: `{}`, {} s, seed {}", g.scenario, g.duration, g.seed);
    }

    let cal = &s.calibrate;
    let mut run = RunDir::create(&out.join("calibrate"))?;
    let result = calibrate::calibrate(cal, &mut run).map_err(|e| e.context("calibrate"))?;
    run.finish("calibrate", Some(cal.seed), cal, &cal.inputs.paths())?;
    top.record(&format!("calibrate/{MANIFEST}"));
    calibrate::print_summary(&result);
    if result.best.is_none() {
        return Err(CliError::runtime(
            "calibrate: no model could be cross-validated",
        ));
    }
    let model = out.join("calibrate").join(MODEL_FILE);

    let speed_cap = cal.preprocess.speed_cap;
    let map_settings = MapRunSettings {
        inputs: vec![cal.inputs.node_log().clone()],
        model: Some(model.clone()),
        level: LevelKind::Calibrated,
        utc_offset: cal.utc_offset,
        speed_cap,
        map: s.map.clone(),
    };
    let mut run = RunDir::create(&out.join("map"))?;
    let mapped = map::map(&map_settings, &mut run).map_err(|e| e.context("map"))?;
    run.finish("map", None, &map_settings, &map_settings.input_paths())?;
    top.record(&format!("map/{MANIFEST}"));
    map::print_summary(&map_settings, &mapped);

    let analyze_settings = AnalyzeRunSettings {
        inputs: vec![cal.inputs.node_log().clone()],
        model: Some(model),
        level: LevelKind::Calibrated,
        utc_offset: cal.utc_offset,
        speed_cap,
        window: cal.preprocess.window,
        analyze: s.analyze.clone(),
    };
    let mut run = RunDir::create(&out.join("analyze"))?;
    let analysed =
        analyze::analyze(&analyze_settings, &mut run).map_err(|e| e.context("analyze"))?;
    run.finish(
        "analyze",
        None,
        &analyze_settings,
        &analyze_settings.input_paths(),
    )?;
    top.record(&format!("analyze/{MANIFEST}"));
    analyze::print_summary(&analyze_settings, &analysed);

    let inputs = if s.generate.is_some() {
        Vec::new()
    } else {
        s.calibrate.inputs.paths()
    };
    let manifest = top.finish("pipeline", Some(s.calibrate.seed), &s, &inputs)?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
