//! Least-squares quadratic surrogate `q(d) ~ alpha1 d^2 + alpha2` of the
//! interference-free power requirement at a fixed altitude.

use serde::{Deserialize, Serialize};

use crate::geo::{avg_path_loss_unchecked, Environment, Vec3};

pub const DEFAULT_FIT_SAMPLES: usize = 201;

/// Interference-free power `gamma sigma^2 L(d)` for a link of 3-D length
/// `d` to a UAV at altitude `h` (`d >= h`).
pub fn q_value(d: f64, h: f64, env: &Environment, gamma: f64) -> f64 {
    let horizontal = (d * d - h * h).max(0.0).sqrt();
    let loss = avg_path_loss_unchecked(&Vec3::ground(0.0, 0.0), &Vec3::new(horizontal, 0.0, h), env);
    gamma * env.noise_w * loss
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadFit {
    pub alpha1: f64,
    pub alpha2: f64,
    pub altitude_m: f64,
    pub fit_domain: (f64, f64),
    /// Largest residual relative to the largest `q` on the fit domain.
    pub max_rel_err: f64,
    /// Largest residual relative to `q` at the same sample.
    pub max_pointwise_rel_err: f64,
}

impl QuadFit {
    pub fn eval(&self, d: f64) -> f64 {
        self.alpha1 * d * d + self.alpha2
    }
}

/// Fit over `samples` distances spread uniformly on `d_range`. A degenerate
/// range is widened by 0.1 % so the two coefficients stay identifiable.
pub fn fit_quadratic(altitude_m: f64, env: &Environment, gamma: f64, d_range: (f64, f64), samples: usize) -> QuadFit {
    let lo = d_range.0.max(altitude_m);
    let mut hi = d_range.1.max(lo);
    if hi - lo <= 1e-9 * lo.max(1.0) {
        hi = lo * 1.001 + 1e-3;
    }
    let n = samples.max(3);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let d = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (d * d, q_value(d, altitude_m, env, gamma))
        })
        .collect();
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mean_q = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, q) in &pts {
        sxy += (t - mean_t) * (q - mean_q);
        sxx += (t - mean_t) * (t - mean_t);
    }
    let alpha1 = sxy / sxx;
    let alpha2 = mean_q - alpha1 * mean_t;

    let q_max = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut max_abs = 0.0f64;
    let mut max_point = 0.0f64;
    for &(t, q) in &pts {
        let r = (alpha1 * t + alpha2 - q).abs();
        max_abs = max_abs.max(r);
        max_point = max_point.max(r / q);
    }
    QuadFit {
        alpha1,
        alpha2,
        altitude_m,
        fit_domain: (lo, hi),
        max_rel_err: max_abs / q_max,
        max_pointwise_rel_err: max_point,
    }
}

/// Distance `eps` at altitude `h` where the power requirement reaches `cap`,
/// found by bisection on the increasing map `d -> q(d)`. `None` when even
/// the vertical link needs more than `cap`.
pub fn power_radius(h: f64, cap: f64, env: &Environment, gamma: f64) -> Option<f64> {
    if q_value(h, h, env, gamma) > cap {
        return None;
    }
    let mut lo = h;
    let mut hi = 2.0 * h.max(1.0);
    while q_value(hi, h, env, gamma) <= cap {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Some(hi);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_value(mid, h, env, gamma) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}
