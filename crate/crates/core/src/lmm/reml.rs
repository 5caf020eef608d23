//! REML fit of `y = Xβ + Zγ + ε` with one random intercept per group.
//!
//! With `θ = σ²_γ / σ²_ε` the marginal covariance is `σ²_ε (I + θ ZZᵀ)`,
//! which is block diagonal with compound-symmetric blocks. Everything the
//! profiled criterion needs reduces to within-group scatter plus one rank-1
//! term per group, so each evaluation costs `O(k p² + p³)` regardless of N.
//! `β` and `σ²_ε` are profiled out analytically; `ln θ` is searched by a
//! log-grid scan and Brent refinement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::inference::{r2_nakagawa, two_sided_p};
use crate::error::LmmError;
use crate::optim::brent_minimize;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlOptions {
    /// Search range for ln θ.
    pub log_ratio_lo: f64,
    pub log_ratio_hi: f64,
    pub grid_points: usize,
    /// Absolute tolerance on ln θ (≈ relative tolerance on θ).
    pub tolerance: f64,
}

impl Default for RemlOptions {
    fn default() -> Self {
        Self {
            log_ratio_lo: -20.0,
            log_ratio_hi: 14.0,
            grid_points: 137,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub terms: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<Option<f64>>,
    pub sigma2_gamma: f64,
    pub sigma2_eps: f64,
    /// σ²_γ / σ²_ε at the optimum.
    pub variance_ratio: f64,
    pub r2_marginal: f64,
    pub r2_conditional: f64,
    pub reml_loglik: f64,
    pub n_obs: usize,
    pub n_groups: usize,
    pub bonferroni_m: usize,
    pub has_intercept: bool,
    pub dropped_levels: Vec<String>,
}

/// Sufficient statistics of a design, independent of θ.
pub struct RemlProblem {
    n: usize,
    p: usize,
    /// Within-group scatter of X, Xᵀy and y.
    wxx: DMatrix<f64>,
    wxy: DVector<f64>,
    wyy: f64,
    /// Per group: size, column sums of X, sum of y.
    sizes: Vec<f64>,
    col_sums: Vec<DVector<f64>>,
    y_sums: Vec<f64>,
}

struct Evaluation {
    loglik: f64,
    beta: DVector<f64>,
    a_inv_diag: DVector<f64>,
    sigma2_eps: f64,
}

impl RemlProblem {
    pub fn new(d: &DesignMatrix) -> Self {
        let n = d.n_obs();
        let p = d.n_cols();
        let k = d.n_groups();
        let y = d.response();
        let mut sizes = vec![0.0; k];
        let mut y_sums = vec![0.0; k];
        let mut col_sums = vec![DVector::zeros(p); k];
        let mut xtx = DMatrix::zeros(p, p);
        for i in 0..n {
            let g = d.groups()[i];
            sizes[g] += 1.0;
            y_sums[g] += y[i];
            for (a, va) in d.row(i) {
                col_sums[g][a] += va;
                for (b, vb) in d.row(i) {
                    xtx[(a, b)] += va * vb;
                }
            }
        }
        let mut wxy = DVector::zeros(p);
        let mut wyy = 0.0;
        for i in 0..n {
            let g = d.groups()[i];
            let dev = y[i] - y_sums[g] / sizes[g];
            wyy += dev * dev;
            for (a, va) in d.row(i) {
                wxy[a] += va * dev;
            }
        }
        let mut wxx = xtx;
        for g in 0..k {
            wxx.ger(-1.0 / sizes[g], &col_sums[g], &col_sums[g], 1.0);
        }
        Self {
            n,
            p,
            wxx,
            wxy,
            wyy,
            sizes,
            col_sums,
            y_sums,
        }
    }

    fn evaluate(&self, theta: f64) -> Option<Evaluation> {
        let mut a = self.wxx.clone();
        let mut b = self.wxy.clone();
        let mut c = self.wyy;
        let mut ln_det_h = 0.0;
        for g in 0..self.sizes.len() {
            let ng = self.sizes[g];
            let u = 1.0 / (ng * (1.0 + ng * theta));
            a.ger(u, &self.col_sums[g], &self.col_sums[g], 1.0);
            b.axpy(u * self.y_sums[g], &self.col_sums[g], 1.0);
            c += u * self.y_sums[g] * self.y_sums[g];
            ln_det_h += (ng * theta).ln_1p();
        }
        let chol = a.cholesky()?;
        let beta = chol.solve(&b);
        let rss = c - b.dot(&beta);
        let dof = (self.n - self.p) as f64;
        if !(rss > 0.0) {
            return None;
        }
        let sigma2_eps = rss / dof;
        let ln_det_a: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let loglik = -0.5 * (dof * (1.0 + LN_2PI + sigma2_eps.ln()) + ln_det_h + ln_det_a);
        let a_inv_diag = chol.inverse().diagonal();
        Some(Evaluation {
            loglik,
            beta,
            a_inv_diag,
            sigma2_eps,
        })
    }

    /// Profiled REML log-likelihood at variance ratio `theta` (≥ 0).
    pub fn reml_loglik(&self, theta: f64) -> f64 {
        self.evaluate(theta).map_or(f64::NEG_INFINITY, |e| e.loglik)
    }

    /// Derivative of the profiled REML log-likelihood with respect to ln θ.
    pub fn reml_score(&self, theta: f64) -> Option<f64> {
        let e = self.evaluate(theta)?;
        let mut a = self.wxx.clone();
        for g in 0..self.sizes.len() {
            let ng = self.sizes[g];
            a.ger(
                1.0 / (ng * (1.0 + ng * theta)),
                &self.col_sums[g],
                &self.col_sums[g],
                1.0,
            );
        }
        let chol = a.cholesky()?;
        let dof = (self.n - self.p) as f64;
        let rss = e.sigma2_eps * dof;
        let (mut d_rss, mut d_det_h, mut d_det_a) = (0.0, 0.0, 0.0);
        for g in 0..self.sizes.len() {
            let ng = self.sizes[g];
            let du = -1.0 / (1.0 + ng * theta).powi(2);
            let s = &self.col_sums[g];
            let resid = self.y_sums[g] - s.dot(&e.beta);
            d_rss += du * resid * resid;
            d_det_h += ng / (1.0 + ng * theta);
            d_det_a += du * s.dot(&chol.solve(s));
        }
        Some(-0.5 * theta * (dof * d_rss / rss + d_det_h + d_det_a))
    }
}

/// Checks that XᵀX is numerically full rank; names the first offending
/// column otherwise.
fn check_rank(d: &DesignMatrix) -> Result<(), LmmError> {
    let p = d.n_cols();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    for i in 0..d.n_obs() {
        for (a, va) in d.row(i) {
            for (b, vb) in d.row(i) {
                xtx[(a, b)] += va * vb;
            }
        }
    }
    let scale: Vec<f64> = (0..p).map(|j| xtx[(j, j)].sqrt()).collect();
    if let Some(j) = scale.iter().position(|&s| !(s > 0.0)) {
        return Err(LmmError::RankDeficient {
            column: d.columns()[j].clone(),
        });
    }
    let corr = DMatrix::from_fn(p, p, |i, j| xtx[(i, j)] / (scale[i] * scale[j]));
    // Pivoted elimination on the correlation matrix
    let mut m = corr;
    let mut remaining: Vec<usize> = (0..p).collect();
    while !remaining.is_empty() {
        let (pos, &piv) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| m[(*a.1, *a.1)].total_cmp(&m[(*b.1, *b.1)]))
            .unwrap();
        let pv = m[(piv, piv)];
        if pv < 1e-10 {
            return Err(LmmError::RankDeficient {
                column: d.columns()[piv].clone(),
            });
        }
        remaining.swap_remove(pos);
        for &i in &remaining {
            let f = m[(i, piv)] / pv;
            for &j in &remaining {
                m[(i, j)] -= f * m[(piv, j)];
            }
        }
    }
    Ok(())
}

pub fn fit_reml(d: &DesignMatrix) -> Result<LmmFit, LmmError> {
    fit_reml_with(d, &RemlOptions::default())
}

/// REML fit. With a single group the random intercept is not identifiable
/// and the fit sits on the σ²_γ = 0 boundary (ordinary least squares).
pub fn fit_reml_with(d: &DesignMatrix, opts: &RemlOptions) -> Result<LmmFit, LmmError> {
    let (n, p, k) = (d.n_obs(), d.n_cols(), d.n_groups());
    if n <= p + 1 || k < 1 {
        return Err(LmmError::TooFewObservations {
            n_obs: n,
            p,
            n_groups: k,
        });
    }
    check_rank(d)?;
    if k == 1 {
        return fit_at_ratio(d, 0.0);
    }
    let prob = RemlProblem::new(d);
    let neg = |phi: f64| -prob.reml_loglik(phi.exp());

    let (lo, hi, m) = (opts.log_ratio_lo, opts.log_ratio_hi, opts.grid_points);
    let step = (hi - lo) / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| neg(lo + step * i as f64)).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if !grid[best].is_finite() {
        return Err(LmmError::OptimFailed {
            reason: "criterion not finite anywhere on the grid (zero residual variance?)".into(),
            lo,
            hi,
        });
    }
    if best == m - 1 {
        return Err(LmmError::OptimFailed {
            reason: "variance ratio diverges (maximum at the upper end of the search range)".into(),
            lo,
            hi,
        });
    }
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = lo + step * (best + 1) as f64;
    let refined = brent_minimize(neg, a, b, 0.0, opts.tolerance, 500);
    if !refined.converged {
        return Err(LmmError::OptimFailed {
            reason: "Brent refinement did not converge".into(),
            lo: a,
            hi: b,
        });
    }
    let mut theta = polish(&prob, refined.x, step).exp();
    let mut best_ll = prob.reml_loglik(theta);
    if -grid[best] > best_ll {
        theta = (lo + step * best as f64).exp();
        best_ll = -grid[best];
    }
    if best == 0 {
        let at_zero = prob.reml_loglik(0.0);
        if at_zero >= best_ll {
            theta = 0.0;
        }
    }
    fit_at_ratio_inner(d, &prob, theta)
}

/// Sharpens an interior optimum by bisecting the score, which resolves θ to
/// near machine precision where the flat criterion alone cannot.
fn polish(prob: &RemlProblem, phi: f64, step: f64) -> f64 {
    let score = |x: f64| prob.reml_score(x.exp()).filter(|v| v.is_finite());
    let mut width = 1e-6;
    let (mut lo, mut hi) = loop {
        let (lo, hi) = (phi - width, phi + width);
        match (score(lo), score(hi)) {
            (Some(a), Some(b)) if a > 0.0 && b < 0.0 => break (lo, hi),
            _ if width < step => width *= 8.0,
            _ => return phi,
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match score(mid) {
            Some(v) if v > 0.0 => lo = mid,
            Some(v) if v < 0.0 => hi = mid,
            Some(_) => return mid,
            None => return phi,
        }
    }
    0.5 * (lo + hi)
}

/// Fit with the variance ratio held fixed; `theta = 0` is ordinary least
/// squares.
pub fn fit_at_ratio(d: &DesignMatrix, theta: f64) -> Result<LmmFit, LmmError> {
    let (n, p, k) = (d.n_obs(), d.n_cols(), d.n_groups());
    if n <= p || k < 1 {
        return Err(LmmError::TooFewObservations {
            n_obs: n,
            p,
            n_groups: k,
        });
    }
    check_rank(d)?;
    fit_at_ratio_inner(d, &RemlProblem::new(d), theta)
}

fn fit_at_ratio_inner(d: &DesignMatrix, prob: &RemlProblem, theta: f64) -> Result<LmmFit, LmmError> {
    let ev = prob.evaluate(theta).ok_or_else(|| LmmError::OptimFailed {
        reason: format!("criterion undefined at ratio {theta}"),
        lo: theta.ln(),
        hi: theta.ln(),
    })?;
    let se: Vec<f64> = ev
        .a_inv_diag
        .iter()
        .map(|v| (ev.sigma2_eps * v).max(0.0).sqrt())
        .collect();
    let beta: Vec<f64> = ev.beta.iter().copied().collect();
    let p_values = beta
        .iter()
        .zip(&se)
        .map(|(&b, &s)| (s > 0.0 && s.is_finite()).then(|| two_sided_p(b / s)))
        .collect();
    let mut fit = LmmFit {
        terms: d.columns().to_vec(),
        beta,
        se,
        p_values,
        sigma2_gamma: theta * ev.sigma2_eps,
        sigma2_eps: ev.sigma2_eps,
        variance_ratio: theta,
        r2_marginal: 0.0,
        r2_conditional: 0.0,
        reml_loglik: ev.loglik,
        n_obs: d.n_obs(),
        n_groups: d.n_groups(),
        bonferroni_m: d.n_cols() - usize::from(d.has_intercept()),
        has_intercept: d.has_intercept(),
        dropped_levels: d.dropped_levels().to_vec(),
    };
    let (r2m, r2c) = r2_nakagawa(&fit, d)?;
    fit.r2_marginal = r2m;
    fit.r2_conditional = r2c;
    Ok(fit)
}
