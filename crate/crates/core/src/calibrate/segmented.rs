use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::linear::line_fit;
use super::model::{BreakpointGrid, CalibrationModel, ModelSpec, Params};
use crate::error::{Error, Result};
use crate::stats::percentile_sorted;

/// Minimum points on each side of a breakpoint.
pub const MIN_SEGMENT_POINTS: usize = 3;
pub const MIN_SR_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Two-segment regression on the node-level column. The breakpoint is the
/// candidate minimizing the summed SSE of independent line fits on each side.
pub fn fit_sr(d: &Dataset, grid: BreakpointGrid) -> Result<CalibrationModel> {
    if d.n() < MIN_SR_POINTS {
        return Err(Error::TooShort {
            needed: MIN_SR_POINTS,
            got: d.n(),
        });
    }
    let x = d.node_column();
    let y = d.y();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let sums = PrefixSums::new(&xs, &ys);
    let mut best: Option<(f64, f64)> = None;
    for xb in candidates(&xs, grid)? {
        // first index on the right-hand side (x ≥ xb)
        let k = xs.partition_point(|&v| v < xb);
        if k < MIN_SEGMENT_POINTS || xs.len() - k < MIN_SEGMENT_POINTS {
            continue;
        }
        let (Some(l), Some(r)) = (sums.sse(0, k), sums.sse(k, xs.len())) else {
            continue;
        };
        let total = l + r;
        if best.is_none_or(|(_, s)| total < s) {
            best = Some((xb, total));
        }
    }
    let (breakpoint, _) = best.ok_or(Error::NoBreakpoint)?;
    let k = xs.partition_point(|&v| v < breakpoint);
    let left = fit_line(&xs[..k], &ys[..k])?;
    let right = fit_line(&xs[k..], &ys[k..])?;
    let sse = segment_sse(&xs[..k], &ys[..k], left) + segment_sse(&xs[k..], &ys[k..], right);
    Ok(CalibrationModel::assemble(
        ModelSpec::Sr { grid },
        Params::Segmented {
            breakpoint,
            left,
            right,
            sse,
        },
        d,
    ))
}

/// Segmented model with a caller-chosen breakpoint. When every point falls on
/// one side, both segments carry the single line fitted to all points.
pub fn fit_sr_at(d: &Dataset, breakpoint: f64) -> Result<CalibrationModel> {
    let x = d.node_column();
    let y = d.y();
    let (lx, ly, rx, ry) = x.iter().zip(y).fold(
        (vec![], vec![], vec![], vec![]),
        |(mut lx, mut ly, mut rx, mut ry), (&xi, &yi)| {
            if xi < breakpoint {
                lx.push(xi);
                ly.push(yi);
            } else {
                rx.push(xi);
                ry.push(yi);
            }
            (lx, ly, rx, ry)
        },
    );
    let (left, right) = if lx.is_empty() || rx.is_empty() {
        let all = fit_line(&x, y)?;
        (all, all)
    } else {
        (fit_line(&lx, &ly)?, fit_line(&rx, &ry)?)
    };
    let sse = segment_sse(&lx, &ly, left) + segment_sse(&rx, &ry, right);
    Ok(CalibrationModel::assemble(
        ModelSpec::Sr {
            grid: BreakpointGrid::Midpoints,
        },
        Params::Segmented {
            breakpoint,
            left,
            right,
            sse,
        },
        d,
    ))
}

fn fit_line(x: &[f64], y: &[f64]) -> Result<Line> {
    let (intercept, slope) = line_fit(x, y)?;
    Ok(Line { intercept, slope })
}

fn segment_sse(x: &[f64], y: &[f64], line: Line) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (b - line.eval(a)).powi(2))
        .sum()
}

/// Candidate breakpoints over the sorted predictor, deduplicated.
fn candidates(sorted_x: &[f64], grid: BreakpointGrid) -> Result<Vec<f64>> {
    let mut out = match grid {
        BreakpointGrid::Percentiles { from, to, step } => {
            if !(step > 0.0) || !(0.0..=100.0).contains(&from) || !(from..=100.0).contains(&to) {
                return Err(Error::InvalidParameter(format!(
                    "bad percentile grid {from}..{to} step {step}"
                )));
            }
            let count = ((to - from) / step + 1e-9).floor() as usize + 1;
            (0..count)
                .map(|i| percentile_sorted(sorted_x, from + i as f64 * step))
                .collect::<Vec<_>>()
        }
        BreakpointGrid::Midpoints => sorted_x
            .windows(2)
            .filter(|w| w[0] < w[1])
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect(),
    };
    out.dedup();
    Ok(out)
}

/// Running sums over centered data so each segment's least-squares SSE comes
/// out in O(1).
struct PrefixSums {
    x: Vec<f64>,
    y: Vec<f64>,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: Vec<f64>,
}

impl PrefixSums {
    fn new(xs: &[f64], ys: &[f64]) -> Self {
        let mx = crate::stats::mean(xs);
        let my = crate::stats::mean(ys);
        let n = xs.len();
        let mut s = Self {
            x: vec![0.0; n + 1],
            y: vec![0.0; n + 1],
            xx: vec![0.0; n + 1],
            xy: vec![0.0; n + 1],
            yy: vec![0.0; n + 1],
        };
        for i in 0..n {
            let (a, b) = (xs[i] - mx, ys[i] - my);
            s.x[i + 1] = s.x[i] + a;
            s.y[i + 1] = s.y[i] + b;
            s.xx[i + 1] = s.xx[i] + a * a;
            s.xy[i + 1] = s.xy[i] + a * b;
            s.yy[i + 1] = s.yy[i] + b * b;
        }
        s
    }

    /// SSE of the best line over `[lo, hi)`, `None` for zero x-variance.
    fn sse(&self, lo: usize, hi: usize) -> Option<f64> {
        let n = (hi - lo) as f64;
        let sx = self.x[hi] - self.x[lo];
        let sy = self.y[hi] - self.y[lo];
        let sxx = self.xx[hi] - self.xx[lo] - sx * sx / n;
        let sxy = self.xy[hi] - self.xy[lo] - sx * sy / n;
        let syy = self.yy[hi] - self.yy[lo] - sy * sy / n;
        if sxx <= 1e-12 * (self.xx[hi] - self.xx[lo]).max(f64::MIN_POSITIVE) {
            return None;
        }
        Some((syy - sxy * sxy / sxx).max(0.0))
    }
}
