use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::EARTH_RADIUS_M;
use crate::error::{Error, Result};
use crate::ingest::Campaign;
use crate::preprocess::AlignedSeries;

pub const DEFAULT_CELL_SIZE_M: f64 = 100.0;
pub const DEFAULT_BAND_THRESHOLDS: [f64; 2] = [75.0, 90.0];

/// A level at a position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub latitude: f64,
    pub longitude: f64,
    pub level: f64,
}

/// Samples of a campaign, using the reference level where present unless
/// `node_only` is set.
pub fn points_from_campaign(c: &Campaign, node_only: bool) -> Vec<GridPoint> {
    c.samples
        .iter()
        .map(|s| GridPoint {
            latitude: s.latitude,
            longitude: s.longitude,
            level: if node_only {
                s.node_level
            } else {
                s.ref_level.unwrap_or(s.node_level)
            },
        })
        .collect()
}

/// Window positions paired with levels produced by `level`.
pub fn points_from_series(
    series: &[AlignedSeries],
    level: impl Fn(&AlignedSeries) -> f64,
) -> Vec<GridPoint> {
    series
        .iter()
        .map(|w| GridPoint {
            latitude: w.latitude,
            longitude: w.longitude,
            level: level(w),
        })
        .collect()
}

/// Which per-cell aggregate drives banding and hotspot selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    #[default]
    Mean,
    Max,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Statistic::Mean),
            "max" => Ok(Statistic::Max),
            _ => Err(Error::Unknown {
                kind: "statistic",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::Mean => "mean",
            Statistic::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: i64,
    pub col: i64,
    pub mean_dba: f64,
    pub max_dba: f64,
    pub count: usize,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
}

impl Cell {
    pub fn value(&self, statistic: Statistic) -> f64 {
        match statistic {
            Statistic::Mean => self.mean_dba,
            Statistic::Max => self.max_dba,
        }
    }
}

/// Square metric cells on a local equirectangular projection.
///
/// The projection is centred on the input bounding box; cell `(0, 0)` has its
/// south-west corner at the box's south-west corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseGrid {
    pub cell_size: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Projected south-west corner of the input, metres east and north.
    pub anchor_x: f64,
    pub anchor_y: f64,
    pub statistic: Statistic,
    /// Occupied cells, ordered by `(row, col)`.
    pub cells: Vec<Cell>,
}

impl NoiseGrid {
    fn cos0(&self) -> f64 {
        self.origin_lat.to_radians().cos()
    }

    /// Local metric coordinates `(east, north)` of a position.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let x = EARTH_RADIUS_M * (lon - self.origin_lon).to_radians() * self.cos0();
        let y = EARTH_RADIUS_M * (lat - self.origin_lat).to_radians();
        (x, y)
    }

    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.origin_lat + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin_lon + (x / (EARTH_RADIUS_M * self.cos0())).to_degrees();
        (lat, lon)
    }

    /// `(row, col)` of the cell containing a position.
    pub fn cell_of(&self, lat: f64, lon: f64) -> (i64, i64) {
        let (x, y) = self.project(lat, lon);
        (
            ((y - self.anchor_y) / self.cell_size).floor() as i64,
            ((x - self.anchor_x) / self.cell_size).floor() as i64,
        )
    }

    pub fn total_count(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }

    /// Closed counter-clockwise ring of `[lon, lat]` corners.
    pub fn ring(&self, cell: &Cell) -> Vec<[f64; 2]> {
        let s = self.cell_size;
        let x0 = self.anchor_x + cell.col as f64 * s;
        let y0 = self.anchor_y + cell.row as f64 * s;
        let corners = [
            (x0, y0),
            (x0 + s, y0),
            (x0 + s, y0 + s),
            (x0, y0 + s),
            (x0, y0),
        ];
        corners
            .iter()
            .map(|&(x, y)| {
                let (lat, lon) = self.unproject(x, y);
                [lon, lat]
            })
            .collect()
    }
}

fn check_point(p: &GridPoint) -> Result<()> {
    let ok = p.latitude.is_finite()
        && p.longitude.is_finite()
        && p.level.is_finite()
        && (-90.0..=90.0).contains(&p.latitude)
        && (-180.0..=180.0).contains(&p.longitude);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "invalid grid point ({}, {}, {})",
            p.latitude, p.longitude, p.level
        )))
    }
}

/// Bins points into square cells of `cell_size` metres.
///
/// Per-cell sums are taken over the cell's points in a canonical order, so
/// the result does not depend on input order.
pub fn build_noise_grid(
    points: &[GridPoint],
    cell_size: f64,
    statistic: Statistic,
) -> Result<NoiseGrid> {
    if points.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    points.iter().try_for_each(check_point)?;
    let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        lat_lo = lat_lo.min(p.latitude);
        lat_hi = lat_hi.max(p.latitude);
        lon_lo = lon_lo.min(p.longitude);
        lon_hi = lon_hi.max(p.longitude);
    }
    let mut grid = NoiseGrid {
        cell_size,
        origin_lat: 0.5 * (lat_lo + lat_hi),
        origin_lon: 0.5 * (lon_lo + lon_hi),
        anchor_x: 0.0,
        anchor_y: 0.0,
        statistic,
        cells: Vec::new(),
    };
    (grid.anchor_x, grid.anchor_y) = grid.project(lat_lo, lon_lo);
    let mut bins: BTreeMap<(i64, i64), Vec<&GridPoint>> = BTreeMap::new();
    for p in points {
        bins.entry(grid.cell_of(p.latitude, p.longitude))
            .or_default()
            .push(p);
    }
    grid.cells = bins
        .into_iter()
        .map(|((row, col), mut members)| {
            members.sort_by(|a, b| {
                a.level
                    .total_cmp(&b.level)
                    .then(a.latitude.total_cmp(&b.latitude))
                    .then(a.longitude.total_cmp(&b.longitude))
            });
            let n = members.len() as f64;
            let mean = members.iter().map(|p| p.level).sum::<f64>() / n;
            Cell {
                row,
                col,
                mean_dba: mean,
                max_dba: members
                    .iter()
                    .map(|p| p.level)
                    .fold(f64::NEG_INFINITY, f64::max),
                count: members.len(),
                centroid_lat: members.iter().map(|p| p.latitude).sum::<f64>() / n,
                centroid_lon: members.iter().map(|p| p.longitude).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(grid)
}

/// Band name for a value: `lt{t0}`, `{t0}to{t1}`, …, `gt{tn}`. A value equal
/// to a cut point belongs to the band above it.
pub fn band_label(value: f64, thresholds: &[f64]) -> String {
    let k = thresholds.partition_point(|&t| t <= value);
    match k {
        0 => format!("lt{}", thresholds.first().copied().unwrap_or(f64::INFINITY)),
        k if k == thresholds.len() => format!("gt{}", thresholds[k - 1]),
        k => format!("{}to{}", thresholds[k - 1], thresholds[k]),
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty()
        || thresholds.iter().any(|t| !t.is_finite())
        || thresholds.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidParameter(
            "band thresholds must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// RFC 7946 FeatureCollection, one polygon per occupied cell.
pub fn geojson_string(g: &NoiseGrid, thresholds: &[f64]) -> Result<String> {
    if g.cells.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    check_thresholds(thresholds)?;
    let features: Vec<Value> = g
        .cells
        .iter()
        .map(|c| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [g.ring(c)] },
                "properties": {
                    "row": c.row,
                    "col": c.col,
                    "mean_dba": c.mean_dba,
                    "max_dba": c.max_dba,
                    "count": c.count,
                    "centroid_lat": c.centroid_lat,
                    "centroid_lon": c.centroid_lon,
                    "band": band_label(c.value(g.statistic), thresholds),
                }
            })
        })
        .collect();
    let doc = json!({
        "type": "FeatureCollection",
        "properties": {
            "cell_size_m": g.cell_size,
            "origin": [g.origin_lon, g.origin_lat],
            "statistic": g.statistic.to_string(),
        },
        "features": features,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn export_geojson(g: &NoiseGrid, path: &Path, thresholds: &[f64]) -> Result<()> {
    let text = geojson_string(g, thresholds)?;
    crate::fsio::write_atomic(path, text.as_bytes())
}

/// Reads the cell statistics back out of an exported document.
pub fn parse_geojson(text: &str) -> Result<Vec<Cell>> {
    let doc: Value = serde_json::from_str(text)?;
    let bad = |what: &str| Error::InvalidDataset(format!("GeoJSON: {what}"));
    if doc["type"] != "FeatureCollection" {
        return Err(bad("not a FeatureCollection"));
    }
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| bad("missing features"))?;
    features
        .iter()
        .map(|f| {
            let p = &f["properties"];
            let num = |k: &str| p[k].as_f64().ok_or_else(|| bad(&format!("missing {k}")));
            let int = |k: &str| p[k].as_i64().ok_or_else(|| bad(&format!("missing {k}")));
            Ok(Cell {
                row: int("row")?,
                col: int("col")?,
                mean_dba: num("mean_dba")?,
                max_dba: num("max_dba")?,
                count: p["count"].as_u64().ok_or_else(|| bad("missing count"))? as usize,
                centroid_lat: num("centroid_lat")?,
                centroid_lon: num("centroid_lon")?,
            })
        })
        .collect()
}

pub fn import_geojson(path: &Path) -> Result<Vec<Cell>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geojson(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64, level: f64) -> GridPoint {
        GridPoint {
            latitude: lat,
            longitude: lon,
            level,
        }
    }

    /// Signed area of a lon/lat ring by the shoelace formula.
    fn signed_area(ring: &[[f64; 2]]) -> f64 {
        ring.windows(2)
            .map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1])
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn one_cell_mean() {
        let pts = [
            pt(17.40000, 78.30000, 70.0),
            pt(17.40001, 78.30001, 74.0),
            pt(17.40002, 78.30000, 78.0),
        ];
        let g = build_noise_grid(&pts, 100.0, Statistic::Mean).unwrap();
        assert_eq!(g.cells.len(), 1);
        assert!((g.cells[0].mean_dba - 74.0).abs() < 1e-12);
        assert_eq!(g.cells[0].max_dba, 78.0);
        assert_eq!(g.cells[0].count, 3);
    }

    #[test]
    fn two_clusters_500_m_apart() {
        // positions built on the sphere; clusters about 500 m apart due east
        // along 12.97°N, shaped differently so no point sits on a cell edge
        let lat: f64 = 12.97;
        let east = |m: f64| 77.59 + (m / (EARTH_RADIUS_M * lat.to_radians().cos())).to_degrees();
        let north = |m: f64| lat + (m / EARTH_RADIUS_M).to_degrees();
        let mut pts = Vec::new();
        for (dx, dy) in [(0.0, 0.0), (10.0, 5.0), (-8.0, 12.0), (4.0, -9.0)] {
            pts.push(pt(north(dy + 30.0), east(dx + 30.0), 70.0));
            pts.push(pt(north(dy / 2.0 + 30.0), east(dx / 2.0 + 533.0), 80.0));
        }
        let g = build_noise_grid(&pts, 100.0, Statistic::Mean).unwrap();
        assert_eq!(g.cells.len(), 2, "{:?}", g.cells);
        assert_eq!(g.total_count(), 8);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            build_noise_grid(&[], 100.0, Statistic::Mean),
            Err(Error::EmptyCampaign)
        ));
        assert!(build_noise_grid(&[pt(0.0, 0.0, 1.0)], 0.0, Statistic::Mean).is_err());
        assert!(build_noise_grid(&[pt(95.0, 0.0, 1.0)], 10.0, Statistic::Mean).is_err());
    }

    #[test]
    fn bands() {
        let t = DEFAULT_BAND_THRESHOLDS;
        assert_eq!(band_label(92.0, &t), "gt90");
        assert_eq!(band_label(80.0, &t), "75to90");
        assert_eq!(band_label(60.0, &t), "lt75");
        assert_eq!(band_label(75.0, &t), "75to90");
        assert_eq!(band_label(90.0, &t), "gt90");
        assert_eq!(band_label(70.0, &[62.5]), "gt62.5");
    }

    #[test]
    fn geojson_one_cell_gt90() {
        let g = build_noise_grid(&[pt(17.4, 78.3, 92.0)], 100.0, Statistic::Mean).unwrap();
        let doc: Value =
            serde_json::from_str(&geojson_string(&g, &DEFAULT_BAND_THRESHOLDS).unwrap()).unwrap();
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(features[0]["properties"]["band"], "gt90");
        let ring: Vec<[f64; 2]> =
            serde_json::from_value(features[0]["geometry"]["coordinates"][0].clone()).unwrap();
        assert_eq!(ring.len(), 5);
        assert_eq!(ring[0], ring[4]);
        assert!(signed_area(&ring) > 0.0);
    }

    #[test]
    fn round_trip_through_file() {
        let pts: Vec<GridPoint> = (0..200)
            .map(|i| {
                let f = i as f64;
                pt(
                    17.4 + (f * 0.37).sin() * 0.01,
                    78.3 + (f * 0.11).cos() * 0.01,
                    60.0 + (f * 1.3) % 35.0,
                )
            })
            .collect();
        let g = build_noise_grid(&pts, 150.0, Statistic::Mean).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.geojson");
        export_geojson(&g, &path, &DEFAULT_BAND_THRESHOLDS).unwrap();
        assert_eq!(import_geojson(&path).unwrap(), g.cells);
        assert!(matches!(
            export_geojson(
                &g,
                &dir.path().join("missing/x.geojson"),
                &DEFAULT_BAND_THRESHOLDS
            ),
            Err(Error::Io { .. })
        ));
    }

    fn arb_points() -> impl Strategy<Value = Vec<GridPoint>> {
        proptest::collection::vec(
            (17.38f64..17.45, 78.28f64..78.36, 40.0f64..110.0).prop_map(|(a, b, c)| pt(a, b, c)),
            1..150,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn counts_conserved_and_means_match(pts in arb_points(), cell in 20.0f64..500.0) {
            let g = build_noise_grid(&pts, cell, Statistic::Mean).unwrap();
            prop_assert_eq!(g.total_count(), pts.len());
            // two-pass oracle per cell
            for c in &g.cells {
                let members: Vec<f64> = pts.iter()
                    .filter(|p| g.cell_of(p.latitude, p.longitude) == (c.row, c.col))
                    .map(|p| p.level)
                    .collect();
                prop_assert_eq!(members.len(), c.count);
                let m = members.iter().sum::<f64>() / members.len() as f64;
                prop_assert!((m - c.mean_dba).abs() <= 1e-9 * m.abs());
                prop_assert!(c.max_dba >= c.mean_dba);
            }
        }

        #[test]
        fn permutation_invariant(pts in arb_points(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pts.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = build_noise_grid(&pts, 100.0, Statistic::Mean).unwrap();
            let b = build_noise_grid(&shuffled, 100.0, Statistic::Mean).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
