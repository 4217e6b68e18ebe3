use std::path::PathBuf;

use noisecal::analytics::hotspots;
use noisecal::calibrate::CalibrationModel;
use noisecal::geo::{build_noise_grid, geojson_string, points_from_campaign, GridPoint, NoiseGrid};
use serde::{Deserialize, Serialize};

use super::csv_bytes;
use crate::args::MapArgs;
use crate::config::{existing, merge, parse, required, speed_cap, utc_offset, MapSettings};
use crate::error::{CliError, CliResult};
use crate::levels::{leveled, load_log, load_model, LevelKind, LevelSource};
use crate::manifest::RunDir;

pub const GEOJSON_FILE: &str = "grid.geojson";
pub const HOTSPOT_FILE: &str = "hotspots.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MapRunSettings {
    pub inputs: Vec<PathBuf>,
    pub model: Option<PathBuf>,
    pub level: LevelKind,
    pub utc_offset: i32,
    pub speed_cap: f64,
    pub map: MapSettings,
}

impl MapRunSettings {
    pub fn resolve(a: &MapArgs) -> CliResult<Self> {
        if a.input.is_empty() {
            return Err(CliError::usage("--input is required"));
        }
        let inputs = a
            .input
            .iter()
            .map(|p| existing("input", p))
            .collect::<CliResult<_>>()?;
        let raw = a.raw.unwrap_or(false);
        let level = match (&a.model, raw) {
            (Some(_), true) => {
                return Err(CliError::usage("--model and --raw are mutually exclusive"))
            }
            (None, false) => {
                return Err(CliError::usage(
                    "give --model, or --raw to map logged levels",
                ))
            }
            (Some(_), false) => {
                if a.level.is_some() {
                    return Err(CliError::usage("--level applies to --raw maps only"));
                }
                LevelKind::Calibrated
            }
            (None, true) => match &a.level {
                Some(l) => match parse::<LevelKind>("level", l)? {
                    LevelKind::Calibrated => {
                        return Err(CliError::usage("--level calibrated needs --model"))
                    }
                    k => k,
                },
                None => LevelKind::Reference,
            },
        };
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
            map: a.map.resolve()?,
        })
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut v = self.inputs.clone();
        v.extend(self.model.clone());
        v
    }
}

pub struct MapOutput {
    pub grid: NoiseGrid,
    pub samples: usize,
    pub hotspots: usize,
}

pub fn source<'a>(kind: LevelKind, model: Option<&'a CalibrationModel>) -> LevelSource<'a> {
    match (kind, model) {
        (LevelKind::Node, _) => LevelSource::Node,
        (LevelKind::Reference, _) => LevelSource::Reference,
        (LevelKind::Calibrated, Some(m)) => LevelSource::Calibrated(m),
        (LevelKind::Calibrated, None) => unreachable!("calibrated level without a model"),
    }
}

pub fn map(s: &MapRunSettings, run: &mut RunDir) -> CliResult<MapOutput> {
    let model = s.model.as_deref().map(load_model).transpose()?;
    let src = source(s.level, model.as_ref());
    let mut points: Vec<GridPoint> = Vec::new();
    for path in &s.inputs {
        let c = load_log(path, None, s.utc_offset)?;
        let c = leveled(&c, &src, s.speed_cap)?;
        points.extend(points_from_campaign(&c, true));
    }
    let grid = build_noise_grid(&points, s.map.cell_size, s.map.statistic)?;
    run.write(
        GEOJSON_FILE,
        geojson_string(&grid, &s.map.bands)?.as_bytes(),
    )?;
    let hot = hotspots(&grid, s.map.threshold);
    run.write(HOTSPOT_FILE, &csv_bytes(&hot)?)?;
    Ok(MapOutput {
        samples: points.len(),
        hotspots: hot.len(),
        grid,
    })
}

pub fn print_summary(s: &MapRunSettings, out: &MapOutput) {
    println!(
        "map: {} samples in {} cells of {} m; {} hotspot(s) at {} ≥ {} dBA",
        out.samples,
        out.grid.cells.len(),
        s.map.cell_size,
        out.hotspots,
        s.map.statistic,
        s.map.threshold
    );
}

pub fn run(args: &MapArgs) -> CliResult<()> {
    let a = merge(args, args.config.as_deref())?;
    let s = MapRunSettings::resolve(&a)?;
    let out = required("out", &a.out)?;
    let mut run = RunDir::create(&out)?;
    let result = map(&s, &mut run)?;
    let manifest = run.finish("map", None, &s, &s.input_paths())?;
    print_summary(&s, &result);
    println!("manifest: {}", manifest.display());
    Ok(())
}
