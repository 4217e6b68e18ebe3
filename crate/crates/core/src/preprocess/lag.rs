use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Campaign, GeoSample};

pub const DEFAULT_MAX_LAG: usize = 120;

/// Extra seconds of overlap required beyond the two search flanks.
const OVERLAP_MARGIN: usize = 30;

/// Result of a cross-correlation lag search.
///
/// A positive `lag` means the node trails the reference: the node reading at
/// second `t` corresponds to the reference reading at `t − lag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    pub lag: i64,
    pub peak_correlation: f64,
    pub mae_at_lag: f64,
    pub rmse_at_lag: f64,
    /// Number of pairs behind the statistics at `lag`.
    pub pairs: usize,
    /// Set when the best lag sits on the edge of the search window, i.e. the
    /// true misalignment may lie outside it.
    pub boundary: bool,
}

/// Lag search over two dense 1 Hz series of equal length.
pub fn estimate_lag(node: &[f64], reference: &[f64], max_lag: usize) -> Result<LagEstimate> {
    if node.len() != reference.len() {
        return Err(Error::InvalidParameter(format!(
            "series lengths differ ({} vs {})",
            node.len(),
            reference.len()
        )));
    }
    let node: Vec<Option<f64>> = node.iter().copied().map(Some).collect();
    let reference: Vec<Option<f64>> = reference.iter().copied().map(Some).collect();
    estimate_lag_sparse(&node, &reference, max_lag)
}

/// Lag search over two series on a shared 1 Hz grid where `None` marks a
/// missing second.
///
/// Every integer shift in `[−max_lag, max_lag]` is scored by the Pearson
/// correlation of the pairs it aligns. Shifts are visited in order of
/// increasing magnitude and only a strictly better score replaces the
/// incumbent, so ties resolve toward the smallest `|lag|`.
pub fn estimate_lag_sparse(
    node: &[Option<f64>],
    reference: &[Option<f64>],
    max_lag: usize,
) -> Result<LagEstimate> {
    let n = node.len().min(reference.len());
    let overlap = (0..n)
        .filter(|&i| node[i].is_some() && reference[i].is_some())
        .count();
    let needed = 2 * max_lag + OVERLAP_MARGIN;
    if overlap < needed {
        return Err(Error::InsufficientOverlap {
            needed,
            got: overlap,
        });
    }
    if is_constant(node) {
        return Err(Error::ZeroVariance("node series".into()));
    }
    if is_constant(reference) {
        return Err(Error::ZeroVariance("reference series".into()));
    }

    let max_lag = max_lag as i64;
    let mut best: Option<(i64, ShiftStats)> = None;
    for lag in search_order(max_lag) {
        let Some(stats) = shift_stats(node, reference, lag) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b)) => stats.r > b.r,
        };
        if better {
            best = Some((lag, stats));
        }
    }
    let (lag, stats) = best.ok_or_else(|| Error::ZeroVariance("every candidate shift".into()))?;
    Ok(LagEstimate {
        lag,
        peak_correlation: stats.r,
        mae_at_lag: stats.mae,
        rmse_at_lag: stats.rmse,
        pairs: stats.pairs,
        boundary: max_lag > 0 && lag.abs() == max_lag,
    })
}

fn search_order(max_lag: i64) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_lag).flat_map(|k| [k, -k]))
}

fn is_constant(series: &[Option<f64>]) -> bool {
    let mut values = series.iter().flatten();
    match values.next() {
        None => true,
        Some(first) => values.all(|v| v == first),
    }
}

struct ShiftStats {
    r: f64,
    mae: f64,
    rmse: f64,
    pairs: usize,
}

/// Statistics of the pairs `(node[t], reference[t − lag])`.
fn shift_stats(node: &[Option<f64>], reference: &[Option<f64>], lag: i64) -> Option<ShiftStats> {
    let n = node.len().min(reference.len()) as i64;
    let t0 = lag.max(0);
    let t1 = (n + lag).min(n);
    let mut xs = Vec::with_capacity((t1 - t0).max(0) as usize);
    let mut ys = Vec::with_capacity(xs.capacity());
    for t in t0..t1 {
        if let (Some(x), Some(y)) = (node[t as usize], reference[(t - lag) as usize]) {
            xs.push(x);
            ys.push(y);
        }
    }
    if xs.len() < 3 {
        return None;
    }
    let r = crate::stats::pearson(&xs, &ys)?;
    let len = xs.len() as f64;
    let (abs, sq) = xs.iter().zip(&ys).fold((0.0, 0.0), |(a, s), (x, y)| {
        let d = x - y;
        (a + d.abs(), s + d * d)
    });
    Some(ShiftStats {
        r,
        mae: abs / len,
        rmse: (sq / len).sqrt(),
        pairs: xs.len(),
    })
}

/// One level per second; `None` where nothing was logged.
pub type SecondColumn = Vec<Option<f64>>;

/// Node and reference levels of a merged campaign laid out on a 1 Hz grid
/// starting at the first timestamp. Returns `(start, node, reference)`.
pub fn second_grid(c: &Campaign) -> Result<(i64, SecondColumn, SecondColumn)> {
    let first = c.samples.first().ok_or(Error::EmptyCampaign)?.timestamp;
    let len = (c.duration() + 1) as usize;
    let mut node = vec![None; len];
    let mut reference = vec![None; len];
    for s in &c.samples {
        let i = (s.timestamp - first) as usize;
        if node[i].is_none() {
            node[i] = Some(s.node_level);
            reference[i] = s.ref_level;
        }
    }
    Ok((first, node, reference))
}

/// Shifts the reference column of a merged campaign by `lag` seconds.
///
/// The sample at second `t` receives the reference level previously recorded
/// at `t − lag`. Node timestamps and coordinates stay as they are; samples
/// left without a reference level are dropped.
pub fn apply_lag(c: &Campaign, lag: i64) -> Result<Campaign> {
    if c.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    if lag.abs() > c.duration() {
        return Err(Error::LagLeavesNoPairs { lag });
    }
    let mut by_second: HashMap<i64, f64> = HashMap::with_capacity(c.len());
    for s in &c.samples {
        if let Some(r) = s.ref_level {
            by_second.entry(s.timestamp).or_insert(r);
        }
    }
    let samples: Vec<GeoSample> = c
        .samples
        .iter()
        .filter_map(|s| {
            by_second.get(&(s.timestamp - lag)).map(|&r| GeoSample {
                ref_level: Some(r),
                ..*s
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::LagLeavesNoPairs { lag });
    }
    Ok(Campaign {
        samples,
        ..c.clone()
    })
}
