use std::path::{Path, PathBuf};

use noisecal::ingest::write_campaign;
use noisecal::simgen::{generate_campaign, scenario, Generated};
use serde::{Deserialize, Serialize};

use crate::args::GenArgs;
use crate::config::{merge, required};
use crate::error::CliResult;
use crate::manifest::RunDir;

pub const NODE_FILE: &str = "node.csv";
pub const REFERENCE_FILE: &str = "reference.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenSettings {
    pub scenario: String,
    pub duration: u32,
    pub seed: u64,
}

impl GenSettings {
    pub fn resolve(
        name: Option<&str>,
        duration: Option<u32>,
        seed: Option<u64>,
    ) -> CliResult<Self> {
        let s = scenario(name.unwrap_or("mobile"))?;
        Ok(Self {
            scenario: s.name,
            duration: duration.unwrap_or(s.duration),
            seed: seed.unwrap_or(0),
        })
    }
}

pub struct GenOutput {
    pub node: PathBuf,
    pub reference: PathBuf,
    pub generated: Generated,
    pub utc_offset: i32,
}

/// Writes the campaign and its truth into `run`.
pub fn generate(settings: &GenSettings, run: &mut RunDir) -> CliResult<GenOutput> {
    let s = scenario(&settings.scenario)?;
    let g = generate_campaign(&s.route, &s.error, settings.duration, settings.seed)?;
    let utc = s.route.utc_offset_seconds;
    let mut write = |name: &str, c: &noisecal::ingest::Campaign| -> CliResult<PathBuf> {
        let path = run.path(name);
        write_campaign(c, &path, utc)?;
        run.record(name);
        let sidecar = noisecal::ingest::meta_sidecar_path(Path::new(name));
        if run.path(&sidecar.to_string_lossy()).exists() {
            run.record(&sidecar.to_string_lossy());
        }
        Ok(path)
    };
    let node = write(NODE_FILE, &g.node)?;
    let reference = write(REFERENCE_FILE, &g.reference)?;
    run.write("truth.json", g.truth.to_json()?.as_bytes())?;
    Ok(GenOutput {
        node,
        reference,
        generated: g,
        utc_offset: utc,
    })
}

pub fn run(args: &GenArgs) -> CliResult<()> {
    let a = merge(args, args.config.as_deref())?;
    let settings = GenSettings::resolve(a.scenario.as_deref(), a.duration, a.seed)?;
    let out = required("out", &a.out)?;
    let mut run = RunDir::create(&out)?;
    let g = generate(&settings, &mut run).map_err(|e| e.context("gen"))?;
    let manifest = run.finish("gen", Some(settings.seed), &settings, &[])?;
    let t = &g.generated.truth;
    println!(
        "generated `{}`: {} s, seed {}, lag {} s, {:.1} km, {} outliers",
        settings.scenario,
        settings.duration,
        settings.seed,
        t.lag,
        t.distance_m / 1000.0,
        t.outlier_timestamps.len()
    );
    println!("  {}", g.node.display());
    println!("  {}", g.reference.display());
    println!("  {}", manifest.display());
    Ok(())
}
