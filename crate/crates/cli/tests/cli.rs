use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use noisecal::analytics::hotspots;
use noisecal::geo::{build_noise_grid, points_from_campaign, Statistic};
use noisecal::ingest::{
    parse_log, write_campaign, Campaign, CampaignMeta, DayClass, GeoSample, LogFormat, ParseOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const IST: i32 = 19_800;
// 2024-05-01 09:00 +05:30, a Wednesday
const START: i64 = 1_714_534_200;

fn noisecal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisecal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert_eq!(
        code(&o),
        0,
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, scenario: &str, duration: u32, seed: u64) -> (PathBuf, PathBuf) {
    let out = dir.join("gen");
    ok(noisecal(&[
        "gen",
        "--scenario",
        scenario,
        "--duration",
        &duration.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        s(&out),
    ]));
    (out.join("node.csv"), out.join("reference.csv"))
}

fn write_log(path: &Path, format: LogFormat, samples: Vec<GeoSample>, meta: CampaignMeta) {
    let c = Campaign::new("t", format, samples).with_meta(meta);
    write_campaign(&c, path, IST).unwrap();
}

#[test]
fn calibrate_all_reports_every_family_and_depth() {
    let tmp = TempDir::new().unwrap();
    let (node, reference) = generate(tmp.path(), "mobile", 3000, 1);
    let out = tmp.path().join("cal");
    ok(noisecal(&[
        "calibrate",
        "--node",
        s(&node),
        "--reference",
        s(&reference),
        "--family",
        "all",
        "--n-trees",
        "20",
        "--out",
        s(&out),
    ]));
    let rows = csv_rows(&out.join("report.csv"));
    let models: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert!(rows.len() >= 7, "{models:?}");
    assert_eq!(
        models,
        [
            "SLR",
            "PR (order = 4)",
            "SR",
            "SVR",
            "DT (depth = 3)",
            "DT (depth = 4)",
            "DT (depth = 5)",
            "RFR (depth = 3)",
            "RFR (depth = 4)",
            "RFR (depth = 5)"
        ]
    );
    assert!(rows.iter().all(|r| r[3] == "ok"));
    let model = json(&out.join("model.json"));
    assert!(model.is_object());

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["subcommand"], "calibrate");
    assert_eq!(m["config"]["preprocess"]["window"], 10);
    assert_eq!(m["config"]["preprocess"]["fence-factor"], 1.5);
    assert_eq!(m["config"]["preprocess"]["max-lag"], 120);
    assert_eq!(m["config"]["model"]["folds"], 10);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    for o in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], noisecal::fsio::sha256_hex(&bytes));
    }
}

#[test]
fn missing_input_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.csv");
    let o = noisecal(&[
        "calibrate",
        "--node",
        s(&missing),
        "--reference",
        s(&missing),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no such file"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn same_seed_forest_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (node, reference) = generate(tmp.path(), "mobile", 2000, 3);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(noisecal(&[
            "calibrate",
            "--node",
            s(&node),
            "--reference",
            s(&reference),
            "--family",
            "RFR",
            "--n-trees",
            "15",
            "--seed",
            "7",
            "--out",
            s(&out),
        ]));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["report.csv", "model.json", "series.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn single_cell_input_maps_to_one_feature() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("node.csv");
    let samples = (0..30)
        .map(|i| GeoSample {
            timestamp: START + i,
            latitude: 17.4,
            longitude: 78.4,
            node_level: 70.0 + (i % 5) as f64,
            ref_level: None,
        })
        .collect();
    write_log(&log, LogFormat::NodeCsv, samples, CampaignMeta::default());
    let out = tmp.path().join("map");
    ok(noisecal(&[
        "map",
        "--input",
        s(&log),
        "--raw",
        "--level",
        "node",
        "--out",
        s(&out),
    ]));
    let g = json(&out.join("grid.geojson"));
    let features = g["features"].as_array().unwrap();
    assert_eq!(features.len(), 1);
    assert_eq!(csv_rows(&out.join("hotspots.csv")).len(), 0);
}

#[test]
fn hotspot_csv_matches_the_library() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("merged.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = (0..2000)
        .map(|i| GeoSample {
            timestamp: START + i,
            latitude: 17.40 + rng.random_range(0.0..0.01),
            longitude: 78.40 + rng.random_range(0.0..0.01),
            node_level: 70.0,
            ref_level: Some((rng.random_range(700..1000) as f64) / 10.0),
        })
        .collect();
    write_log(&log, LogFormat::MergedCsv, samples, CampaignMeta::default());
    let out = tmp.path().join("map");
    ok(noisecal(&[
        "map",
        "--input",
        s(&log),
        "--raw",
        "--threshold",
        "90",
        "--cell-size",
        "150",
        "--out",
        s(&out),
    ]));

    let parsed = parse_log(
        &log,
        LogFormat::MergedCsv,
        &ParseOptions {
            utc_offset_seconds: IST,
            ..Default::default()
        },
    )
    .unwrap();
    let grid = build_noise_grid(
        &points_from_campaign(&parsed.campaign, false),
        150.0,
        Statistic::Mean,
    )
    .unwrap();
    let expected = hotspots(&grid, 90.0);
    assert!(!expected.is_empty());
    let rows = csv_rows(&out.join("hotspots.csv"));
    assert_eq!(rows.len(), expected.len());
    for (r, c) in rows.iter().zip(&expected) {
        assert_eq!(r[0].parse::<i64>().unwrap(), c.row);
        assert_eq!(r[1].parse::<i64>().unwrap(), c.col);
        assert_eq!(r[2].parse::<f64>().unwrap(), c.mean_dba);
        assert_eq!(r[4].parse::<usize>().unwrap(), c.count);
        assert!(c.mean_dba >= 90.0);
    }
    // every cell at or above the threshold, none missing
    let above = grid.cells.iter().filter(|c| c.mean_dba >= 90.0).count();
    assert_eq!(above, rows.len());
}

#[test]
fn empty_campaign_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let log = tmp.path().join("node.csv");
    fs::write(&log, "datetime,latitude,longitude,node_dba\n").unwrap();
    let o = noisecal(&[
        "map",
        "--input",
        s(&log),
        "--raw",
        "--level",
        "node",
        "--out",
        s(&tmp.path().join("map")),
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn two_group_means_match_direct_computation() {
    let tmp = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut expected = Vec::new();
    let mut inputs = Vec::new();
    for (name, day, centre) in [("a", DayClass::Weekday, 72), ("b", DayClass::Weekend, 78)] {
        let levels: Vec<f64> = (0..600)
            .map(|_| (centre * 10 + rng.random_range(-50..=50)) as f64 / 10.0)
            .collect();
        let samples = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| GeoSample {
                timestamp: START + i as i64,
                latitude: 17.4 + i as f64 * 2e-5,
                longitude: 78.4,
                node_level: l,
                ref_level: None,
            })
            .collect();
        let path = tmp.path().join(format!("{name}.csv"));
        let meta = CampaignMeta {
            day_class: Some(day),
            ..Default::default()
        };
        write_log(&path, LogFormat::NodeCsv, samples, meta);
        let mean = levels.iter().sum::<f64>() / levels.len() as f64;
        let var = levels.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / levels.len() as f64;
        expected.push((day.as_str(), mean, var));
        inputs.push(path);
    }
    let out = tmp.path().join("an");
    ok(noisecal(&[
        "analyze",
        "--input",
        s(&inputs[0]),
        "--input",
        s(&inputs[1]),
        "--level",
        "node",
        "--group-by",
        "day-class",
        "--out",
        s(&out),
    ]));
    let rows = csv_rows(&out.join("summaries.csv"));
    assert_eq!(rows.len(), 2);
    for (row, (label, mean, var)) in rows.iter().zip(&expected) {
        assert_eq!(row[0], *label);
        assert!((row[1].parse::<f64>().unwrap() - mean).abs() < 1e-9);
        assert!((row[2].parse::<f64>().unwrap() - var).abs() < 1e-9);
        assert_eq!(row[5], "600");
    }
    let cmp = csv_rows(&out.join("comparisons.csv"));
    assert_eq!(cmp.len(), 1);
    let diff: f64 = cmp[0][4].parse().unwrap();
    assert!((diff - (expected[0].1 - expected[1].1)).abs() < 1e-9);
    // one constant speed: a single velocity bin
    let trend = csv_rows(&out.join("trend.csv"));
    assert!(trend[0][0].starts_with("skipped: "), "{:?}", trend[0]);
}

#[test]
fn unknown_zone_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let (node, _) = generate(tmp.path(), "lab", 600, 0);
    let o = noisecal(&[
        "analyze",
        "--input",
        s(&node),
        "--level",
        "node",
        "--zone",
        "harbour",
        "--out",
        s(&tmp.path().join("an")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("harbour"));
}

#[test]
fn stationary_data_skips_the_velocity_trend() {
    let tmp = TempDir::new().unwrap();
    let (_, reference) = generate(tmp.path(), "lab", 1200, 2);
    let out = tmp.path().join("an");
    ok(noisecal(&[
        "analyze",
        "--input",
        s(&reference),
        "--out",
        s(&out),
    ]));
    let trend = csv_rows(&out.join("trend.csv"));
    assert_eq!(trend.len(), 1);
    assert_eq!(trend[0][0], "skipped: no velocity");
    assert!(!out.join("trend_bins.csv").exists());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let (node, reference) = generate(tmp.path(), "mobile", 1500, 4);
    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"node": "{}", "reference": "{}", "family": "SLR,DT", "depths": [2], "folds": 5}}"#,
            s(&node),
            s(&reference)
        ),
    )
    .unwrap();
    let out = tmp.path().join("cal");
    ok(noisecal(&[
        "calibrate",
        "--config",
        s(&cfg),
        "--folds",
        "3",
        "--out",
        s(&out),
    ]));
    let rows = csv_rows(&out.join("report.csv"));
    let models: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(models, ["SLR", "DT (depth = 2)"]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["model"]["folds"], 3);

    fs::write(&cfg, r#"{"folds": 5, "colour": "blue"}"#).unwrap();
    let o = noisecal(&["calibrate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&noisecal(&["--help"])), 0);
    assert_eq!(code(&noisecal(&["calibrate", "--no-such-flag"])), 2);
    assert_eq!(code(&noisecal(&["frobnicate"])), 2);
    let tmp = TempDir::new().unwrap();
    let (node, _) = generate(tmp.path(), "lab", 600, 0);
    // neither a model nor raw mode
    let o = noisecal(&[
        "map",
        "--input",
        s(&node),
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(code(&o), 2);
    let o = noisecal(&[
        "map",
        "--input",
        s(&node),
        "--raw",
        "--statistic",
        "median",
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pipeline_writes_a_manifest_per_stage() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p");
    let o = ok(noisecal(&[
        "pipeline",
        "--duration",
        "2000",
        "--family",
        "SLR,RFR",
        "--depths",
        "4",
        "--n-trees",
        "10",
        "--velocity",
        "--out",
        s(&out),
    ]));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("best:"), "{stdout}");
    let m = json(&out.join("manifest.json"));
    let stages: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        [
            "gen/manifest.json",
            "calibrate/manifest.json",
            "map/manifest.json",
            "analyze/manifest.json"
        ]
    );
    let rows = csv_rows(&out.join("calibrate/report.csv"));
    let models: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(models, ["SLR", "RFR (depth = 4)"]);
    assert!(rows.iter().all(|r| r[2] == "node_mean+velocity_mps"));
    assert!(out.join("map/grid.geojson").exists());
    assert!(out.join("analyze/standards.csv").exists());
}
