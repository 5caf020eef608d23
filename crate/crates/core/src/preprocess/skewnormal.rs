//! Skew-normal density and maximum-likelihood fitting.
//!
//! Density: `f(x) = 2/ω · φ((x−ξ)/ω) · Φ(α (x−ξ)/ω)`.
//! The fit runs Newton iterations on `(ξ, ln ω, α)` with the analytic
//! gradient and Hessian, damped until the step increases the likelihood.

use nalgebra::{Matrix3, Vector3};
use statrs::function::erf::erfc;

use crate::optim::grid_then_brent;

const LN_2: f64 = std::f64::consts::LN_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const MAX_ABS_ALPHA: f64 = 50.0;

/// Mills ratio `R(x) = Φ(−x)/φ(x)` for `x >= 5`, by continued fraction.
fn mills_ratio(x: f64) -> f64 {
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + k as f64 / acc;
    }
    1.0 / acc
}

/// Returns `(ln Φ(u), φ(u)/Φ(u))`, stable in both tails.
pub(crate) fn ln_cdf_and_ratio(u: f64) -> (f64, f64) {
    if u < -5.0 {
        let r = mills_ratio(-u);
        let ln_phi = -0.5 * u * u - LN_SQRT_2PI;
        (ln_phi + r.ln(), 1.0 / r)
    } else {
        let upper = 0.5 * erfc(u * FRAC_1_SQRT_2);
        let cdf = 1.0 - upper;
        let ln_cdf = if upper < 0.5 { (-upper).ln_1p() } else { cdf.ln() };
        let pdf = (-0.5 * u * u - LN_SQRT_2PI).exp();
        (ln_cdf, pdf / cdf)
    }
}

pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u * FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormal {
    pub fn new(location: f64, scale: f64, shape: f64) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        Self { location, scale, shape }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        let (ln_cdf, _) = ln_cdf_and_ratio(self.shape * z);
        LN_2 - self.scale.ln() - 0.5 * z * z - LN_SQRT_2PI + ln_cdf
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn delta(&self) -> f64 {
        self.shape / (1.0 + self.shape * self.shape).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.location + self.scale * self.delta() * (2.0 / std::f64::consts::PI).sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.scale * self.scale * (1.0 - 2.0 * d * d / std::f64::consts::PI)
    }

    /// Argmax of the density: grid over `[ξ − 5ω, ξ + 5ω]`, then Brent to
    /// `1e-6 · ω`.
    pub fn mode(&self) -> f64 {
        let lo = self.location - 5.0 * self.scale;
        let hi = self.location + 5.0 * self.scale;
        let (m, _) = grid_then_brent(|x| -self.ln_pdf(x), lo, hi, 201, 0.0, 0.5e-6 * self.scale);
        m.x
    }

    pub fn log_likelihood(&self, data: &[f64]) -> f64 {
        data.iter().map(|&x| self.ln_pdf(x)).sum()
    }

    /// Method-of-moments estimate; sample skewness is clipped to the range
    /// the family can represent.
    pub fn method_of_moments(data: &[f64]) -> Option<Self> {
        let n = data.len() as f64;
        if data.len() < 3 {
            return None;
        }
        let mean = data.iter().sum::<f64>() / n;
        let m2 = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        if !(m2 > 0.0) {
            return None;
        }
        let m3 = data.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let skew = (m3 / m2.powf(1.5)).clamp(-0.99, 0.99);
        let g23 = skew.abs().powf(2.0 / 3.0);
        let c = ((4.0 - std::f64::consts::PI) / 2.0).powf(2.0 / 3.0);
        let delta = skew.signum() * (std::f64::consts::FRAC_PI_2 * g23 / (g23 + c)).sqrt();
        let delta = delta.clamp(-0.995, 0.995);
        let shape = delta / (1.0 - delta * delta).sqrt();
        let scale = (m2 / (1.0 - 2.0 * delta * delta / std::f64::consts::PI)).sqrt();
        let location = mean - scale * delta * (2.0 / std::f64::consts::PI).sqrt();
        Some(Self::new(location, scale, shape))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalFit {
    pub dist: SkewNormal,
    pub log_likelihood: f64,
    pub initial: SkewNormal,
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Log-likelihood, gradient and Hessian in `(ξ, ln ω, α)`.
fn derivatives(data: &[f64], p: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let (xi, eta, alpha) = (p[0], p[1], p[2]);
    let omega = eta.exp();
    let inv_w = 1.0 / omega;
    let mut ll = 0.0;
    // accumulators
    let (mut s_zar, mut s_d1, mut s_rz) = (0.0, 0.0, 0.0);
    let (mut s_a, mut s_zar2, mut s_rpz) = (0.0, 0.0, 0.0);
    let (mut s_hee, mut s_hea, mut s_haa) = (0.0, 0.0, 0.0);
    for &x in data {
        let z = (x - xi) * inv_w;
        let u = alpha * z;
        let (ln_cdf, r) = ln_cdf_and_ratio(u);
        let rp = -r * (u + r);
        ll += -0.5 * z * z + ln_cdf;
        s_zar += z - alpha * r;
        s_d1 += z * z - r * u;
        s_rz += r * z;
        let one_m = 1.0 - alpha * alpha * rp;
        s_a += one_m;
        s_zar2 += z * one_m;
        s_rpz += -r - alpha * rp * z;
        s_hee += -2.0 * z * z + alpha * alpha * rp * z * z + u * r;
        s_hea += -z * (r + alpha * z * rp);
        s_haa += rp * z * z;
    }
    let n = data.len() as f64;
    ll += n * (LN_2 - eta - LN_SQRT_2PI);
    let g_xi = inv_w * s_zar;
    let grad = Vector3::new(g_xi, s_d1 - n, s_rz);
    let h_xx = -inv_w * inv_w * s_a;
    let h_xe = -g_xi - inv_w * s_zar2;
    let h_xa = inv_w * s_rpz;
    let hess = Matrix3::new(
        h_xx, h_xe, h_xa, //
        h_xe, s_hee, s_hea, //
        h_xa, s_hea, s_haa,
    );
    (ll, grad, hess)
}

fn log_lik(data: &[f64], p: &Vector3<f64>) -> f64 {
    if p[2].abs() > MAX_ABS_ALPHA {
        return f64::NEG_INFINITY;
    }
    SkewNormal::new(p[0], p[1].exp(), p[2]).log_likelihood(data)
}

/// Maximum-likelihood fit started from the method-of-moments estimate.
/// `None` when the sample has fewer than three points or zero variance.
pub fn fit_skew_normal(data: &[f64]) -> Option<SkewNormalFit> {
    let initial = SkewNormal::method_of_moments(data)?;
    let initial_ll = initial.log_likelihood(data);
    let mut p = Vector3::new(initial.location, initial.scale.ln(), initial.shape);
    let mut ll = initial_ll;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..200 {
        iterations = it + 1;
        let (_, grad, hess) = derivatives(data, &p);
        let neg_h = -hess;
        // Levenberg damping until the Newton system is positive definite
        let mut lambda = 0.0;
        let mut step = None;
        for _ in 0..30 {
            let mut m = neg_h;
            if lambda > 0.0 {
                for i in 0..3 {
                    m[(i, i)] += lambda * neg_h[(i, i)].abs().max(1e-8);
                }
            }
            if let Some(ch) = m.cholesky() {
                step = Some(ch.solve(&grad));
                break;
            }
            lambda = if lambda == 0.0 { 1e-4 } else { lambda * 10.0 };
        }
        let Some(step) = step else { break };

        // Newton decrement: predicted log-likelihood gain of the full step
        let decrement = grad.dot(&step);
        if decrement < 1e-10 {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let cand = p + step * t;
            let cand_ll = log_lik(data, &cand);
            if cand_ll.is_finite() && cand_ll >= ll {
                p = cand;
                ll = cand_ll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            converged = decrement < 1e-6;
            break;
        }
    }

    Some(SkewNormalFit {
        dist: SkewNormal::new(p[0], p[1].exp(), p[2]),
        log_likelihood: ll,
        initial,
        initial_log_likelihood: initial_ll,
        iterations,
        converged,
    })
}
