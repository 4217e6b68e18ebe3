//! ε-insensitive support vector regression with an RBF kernel.
//!
//! The dual over `β = (α, α*) ∈ R^{2n}` is
//!
//! ```text
//! min ½ βᵀQβ + pᵀβ   s.t.  sᵀβ = 0,  0 ≤ β ≤ C
//! Q_tu = s_t s_u K(x_t, x_u),   s = (+1…, −1…),   p = (ε − y, ε + y)
//! ```
//!
//! and is solved by sequential minimal optimization: each step picks the
//! maximal-violating pair with second-order working-set selection and solves
//! the two-variable subproblem analytically.

use std::collections::VecDeque;

use super::dataset::Dataset;
use super::model::{CalibrationModel, ModelSpec, Params};
use crate::error::{Error, Result};

pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;
/// Kernel entries kept in the row cache.
const CACHE_ENTRIES: usize = 16 * 1024 * 1024;

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (p · var(X))` over all predictor entries, or 1 for constant inputs.
pub fn default_gamma(d: &Dataset) -> f64 {
    let var = crate::stats::population_variance(d.x().as_slice());
    if var > 0.0 {
        1.0 / (d.p() as f64 * var)
    } else {
        1.0
    }
}

pub fn fit_svr(d: &Dataset, c: f64, epsilon: f64, gamma: Option<f64>) -> Result<CalibrationModel> {
    fit_svr_capped(d, c, epsilon, gamma, super::model::DEFAULT_SVR_MAX_ITER)
}

pub fn fit_svr_capped(
    d: &Dataset,
    c: f64,
    epsilon: f64,
    gamma: Option<f64>,
    max_iter: usize,
) -> Result<CalibrationModel> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {c}"
        )));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    if let Some(g) = gamma {
        if !(g > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {g}"
            )));
        }
    }
    if d.n() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: d.n(),
        });
    }
    let g = gamma.unwrap_or_else(|| default_gamma(d));
    let rows: Vec<Vec<f64>> = d.x().iter_rows().map(<[f64]>::to_vec).collect();
    let sol = SmoSolver::new(&rows, d.y(), c, epsilon, g).solve(max_iter)?;

    let n = rows.len();
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let coef = sol.beta[i] - sol.beta[i + n];
        if coef != 0.0 {
            support_vectors.push(row.clone());
            dual_coef.push(coef);
        }
    }
    Ok(CalibrationModel::assemble(
        ModelSpec::Svr {
            c,
            epsilon,
            gamma,
            max_iter,
        },
        Params::Svr {
            support_vectors,
            dual_coef,
            bias: -sol.rho,
            gamma: g,
            objective: sol.objective,
            iterations: sol.iterations,
        },
        d,
    ))
}

pub(crate) struct Solution {
    pub beta: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
}

struct KernelCache<'a> {
    rows: &'a [Vec<f64>],
    gamma: f64,
    capacity: usize,
    order: VecDeque<usize>,
    slots: Vec<Option<Vec<f64>>>,
}

impl<'a> KernelCache<'a> {
    fn new(rows: &'a [Vec<f64>], gamma: f64) -> Self {
        let n = rows.len();
        Self {
            rows,
            gamma,
            capacity: (CACHE_ENTRIES / n.max(1)).clamp(2, n.max(2)),
            order: VecDeque::new(),
            slots: vec![None; n],
        }
    }

    /// Kernel row `K(x_i, ·)`.
    fn row(&mut self, i: usize) -> &[f64] {
        if self.slots[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.slots[old] = None;
                }
            }
            let xi = &self.rows[i];
            let row = self.rows.iter().map(|xj| rbf(xi, xj, self.gamma)).collect();
            self.slots[i] = Some(row);
            self.order.push_back(i);
        }
        self.slots[i].as_deref().expect("row just filled")
    }
}

pub(crate) struct SmoSolver<'a> {
    n: usize,
    c: f64,
    y: &'a [f64],
    epsilon: f64,
    cache: KernelCache<'a>,
}

impl<'a> SmoSolver<'a> {
    pub(crate) fn new(
        rows: &'a [Vec<f64>],
        y: &'a [f64],
        c: f64,
        epsilon: f64,
        gamma: f64,
    ) -> Self {
        Self {
            n: rows.len(),
            c,
            y,
            epsilon,
            cache: KernelCache::new(rows, gamma),
        }
    }

    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    fn linear_term(&self, t: usize) -> f64 {
        if t < self.n {
            self.epsilon - self.y[t]
        } else {
            self.epsilon + self.y[t - self.n]
        }
    }

    pub(crate) fn solve(mut self, max_iter: usize) -> Result<Solution> {
        let n = self.n;
        let l = 2 * n;
        let c = self.c;
        let mut beta = vec![0.0; l];
        let mut grad: Vec<f64> = (0..l).map(|t| self.linear_term(t)).collect();
        let sign: Vec<f64> = (0..l).map(|t| self.sign(t)).collect();
        // K(x, x) = 1 for the RBF kernel.
        let qd = 1.0;

        let mut iterations = 0;
        while let Some((i, j)) = self.select_working_set(&beta, &grad, &sign) {
            if iterations >= max_iter {
                let violation = self.max_violation(&beta, &grad, &sign);
                let gap = self.duality_gap(&beta, &grad);
                if violation >= KKT_TOLERANCE {
                    return Err(Error::NotConverged { iterations, gap });
                }
                break;
            }
            iterations += 1;

            let (ii, jj) = (i % n, j % n);
            let (si, sj) = (sign[i], sign[j]);
            let k_ij = self.cache.row(ii)[jj];
            let q_ij = si * sj * k_ij;
            let (old_i, old_j) = (beta[i], beta[j]);

            if si != sj {
                let quad = (qd + qd + 2.0 * q_ij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = beta[i] - beta[j];
                beta[i] += delta;
                beta[j] += delta;
                if diff > 0.0 {
                    if beta[j] < 0.0 {
                        beta[j] = 0.0;
                        beta[i] = diff;
                    }
                } else if beta[i] < 0.0 {
                    beta[i] = 0.0;
                    beta[j] = -diff;
                }
                if diff > 0.0 {
                    if beta[i] > c {
                        beta[i] = c;
                        beta[j] = c - diff;
                    }
                } else if beta[j] > c {
                    beta[j] = c;
                    beta[i] = c + diff;
                }
            } else {
                let quad = (qd + qd - 2.0 * q_ij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = beta[i] + beta[j];
                beta[i] -= delta;
                beta[j] += delta;
                if sum > c {
                    if beta[i] > c {
                        beta[i] = c;
                        beta[j] = sum - c;
                    }
                } else if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = sum;
                }
                if sum > c {
                    if beta[j] > c {
                        beta[j] = c;
                        beta[i] = sum - c;
                    }
                } else if beta[i] < 0.0 {
                    beta[i] = 0.0;
                    beta[j] = sum;
                }
            }

            let d_i = beta[i] - old_i;
            let d_j = beta[j] - old_j;
            let row_i = self.cache.row(ii).to_vec();
            let row_j = self.cache.row(jj);
            for t in 0..l {
                let k = t % n;
                grad[t] += sign[t] * (si * row_i[k] * d_i + sj * row_j[k] * d_j);
            }
        }

        let rho = self.rho(&beta, &grad, &sign);
        let objective = 0.5
            * beta
                .iter()
                .zip(&grad)
                .enumerate()
                .map(|(t, (b, g))| b * (g + self.linear_term(t)))
                .sum::<f64>();
        Ok(Solution {
            beta,
            rho,
            objective,
            iterations,
        })
    }

    fn is_upper(&self, b: f64) -> bool {
        b >= self.c
    }

    fn is_lower(b: f64) -> bool {
        b <= 0.0
    }

    fn in_up(&self, t: usize, beta: &[f64], sign: &[f64]) -> bool {
        if sign[t] > 0.0 {
            !self.is_upper(beta[t])
        } else {
            !Self::is_lower(beta[t])
        }
    }

    fn in_low(&self, t: usize, beta: &[f64], sign: &[f64]) -> bool {
        if sign[t] > 0.0 {
            !Self::is_lower(beta[t])
        } else {
            !self.is_upper(beta[t])
        }
    }

    fn max_violation(&self, beta: &[f64], grad: &[f64], sign: &[f64]) -> f64 {
        let l = beta.len();
        let up = (0..l)
            .filter(|&t| self.in_up(t, beta, sign))
            .map(|t| -sign[t] * grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let low = (0..l)
            .filter(|&t| self.in_low(t, beta, sign))
            .map(|t| sign[t] * grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        up + low
    }

    /// Second-order working-set selection; `None` once the maximal KKT
    /// violation drops below tolerance.
    fn select_working_set(
        &mut self,
        beta: &[f64],
        grad: &[f64],
        sign: &[f64],
    ) -> Option<(usize, usize)> {
        let l = beta.len();
        let n = self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            if self.in_up(t, beta, sign) {
                let v = -sign[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let i = i_sel?;
        let si = sign[i];
        let row_i = self.cache.row(i % n).to_vec();

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..l {
            if !self.in_low(t, beta, sign) {
                continue;
            }
            let st = sign[t];
            let v = st * grad[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let q_it = si * st * row_i[t % n];
                let quad = (2.0 - 2.0 * si * st * q_it).max(TAU);
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < KKT_TOLERANCE {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn rho(&self, beta: &[f64], grad: &[f64], sign: &[f64]) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut sum_free = 0.0;
        let mut n_free = 0usize;
        for t in 0..beta.len() {
            let yg = sign[t] * grad[t];
            if self.is_upper(beta[t]) {
                if sign[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if Self::is_lower(beta[t]) {
                if sign[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            0.5 * (ub + lb)
        }
    }

    /// Primal objective minus dual objective, both recovered from the gradient.
    fn duality_gap(&self, beta: &[f64], grad: &[f64]) -> f64 {
        let n = self.n;
        let sign: Vec<f64> = (0..2 * n).map(|t| self.sign(t)).collect();
        let rho = self.rho(beta, grad, &sign);
        // βᵀQβ = βᵀ(G − p)
        let quad: f64 = beta
            .iter()
            .zip(grad)
            .enumerate()
            .map(|(t, (b, g))| b * (g - self.linear_term(t)))
            .sum();
        let dual = 0.5 * quad
            + beta
                .iter()
                .enumerate()
                .map(|(t, b)| b * self.linear_term(t))
                .sum::<f64>();
        let hinge: f64 = (0..n)
            .map(|i| {
                // f(x_i) = Σ coef K − ρ = G_i − ε + y_i − ρ
                let f = grad[i] - self.epsilon + self.y[i] - rho;
                ((self.y[i] - f).abs() - self.epsilon).max(0.0)
            })
            .sum();
        0.5 * quad + self.c * hinge + dual
    }
}
