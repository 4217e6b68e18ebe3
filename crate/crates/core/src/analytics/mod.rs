//! Temporal, distributional, spatial and regulatory summaries of noise levels.

mod standards;
mod temporal;
mod trend;

pub use standards::{
    exceedance_fraction, leq_intervals, standards_check, standards_check_samples, DayNight,
    ExceedanceItem, ExceedanceReport, Period, Zone,
};
pub use temporal::{
    compare_distributions, label_campaign, summarize, temporal_profile, Comparison,
    DistributionSummary, GroupBy, LabeledLevels, TemporalProfile,
};
pub use trend::{
    velocity_noise_trend, VelocityBin, VelocityTrend, DEFAULT_VELOCITY_BIN, MIN_TREND_WINDOWS,
};

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{Cell, NoiseGrid};

/// Cells whose grid statistic (mean by default) is at least `threshold`,
/// highest first; ties keep `(row, col)` order.
pub fn hotspots(g: &NoiseGrid, threshold: f64) -> Vec<Cell> {
    let mut out: Vec<Cell> = g
        .cells
        .iter()
        .filter(|c| c.value(g.statistic) >= threshold)
        .cloned()
        .collect();
    out.sort_by(|a, b| b.value(g.statistic).total_cmp(&a.value(g.statistic)));
    out
}

/// Writes any list of flat records as CSV with a header row.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Levels sorted ascending; the canonical order for every sum in this module.
pub(crate) fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-pass mean and population variance of already-sorted values.
pub(crate) fn mean_var(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{build_noise_grid, GridPoint, Statistic};
    use proptest::prelude::*;

    fn grid_from(levels: &[(f64, f64, f64)]) -> NoiseGrid {
        let pts: Vec<GridPoint> = levels
            .iter()
            .map(|&(a, b, l)| GridPoint {
                latitude: a,
                longitude: b,
                level: l,
            })
            .collect();
        build_noise_grid(&pts, 100.0, Statistic::Mean).unwrap()
    }

    #[test]
    fn single_hot_cell() {
        let g = grid_from(&[(17.4, 78.3, 92.0), (17.41, 78.3, 80.0)]);
        let h = hotspots(&g, 90.0);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].mean_dba, 92.0);
        assert!(hotspots(&g, 95.0).is_empty());
    }

    proptest! {
        #[test]
        fn hotspots_match_brute_force(
            pts in proptest::collection::vec((17.38f64..17.42, 78.28f64..78.32, 50.0f64..110.0), 1..80),
            threshold in 50.0f64..110.0,
        ) {
            let g = grid_from(&pts);
            let got = hotspots(&g, threshold);
            let mut expected: Vec<&Cell> = g.cells.iter().filter(|c| c.mean_dba >= threshold).collect();
            expected.sort_by(|a, b| b.mean_dba.partial_cmp(&a.mean_dba).unwrap());
            prop_assert_eq!(got.len(), expected.len());
            for (a, b) in got.iter().zip(&expected) {
                prop_assert_eq!(a.mean_dba, b.mean_dba);
            }
            prop_assert_eq!(hotspots(&g, f64::NEG_INFINITY).len(), g.cells.len());
            prop_assert!(hotspots(&g, threshold + 1.0).len() <= got.len());
        }
    }
}
