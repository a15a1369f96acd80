//! Fixed-altitude placement without interference as a QCQP solved through
//! its Lagrange dual.
//!
//! Primal: `min_s sum_i |s - u_i|^2  s.t. |s - u_i|^2 <= rho_i^2` where
//! `rho_i^2 = eps_i^2 - h^2`. With `P(l) = 2(n + sum l) I` and
//! `Q(l) = -2 sum (1 + l_i) u_i` the minimizer of the Lagrangian is the
//! weighted centroid `s*(l) = -P^-1 Q`, and the dual
//! `f(l) = -1/2 Q'P^-1 Q + r(l)` is maximized over `l >= 0` by projected
//! gradient ascent with Barzilai-Borwein steps.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcqpError {
    #[error("device {0} cannot be served at this altitude")]
    RadiusBelowAltitude(usize),
    #[error("power discs of devices {0} and {1} do not intersect")]
    DisjointPair(usize, usize),
    #[error("dual objective unbounded; power discs have no common point")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub s: (f64, f64),
    pub lambda: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub iterations: usize,
    /// Largest `|s - u_i| - rho_i` over constrained devices.
    pub max_violation_m: f64,
}

const MAX_ITERS: usize = 20_000;
const GAP_TOL: f64 = 1e-9;
const LAMBDA_BLOWUP: f64 = 1e12;

struct Scaled {
    pts: Vec<(f64, f64)>,
    // squared radii, `None` for devices without a power constraint
    rho2: Vec<Option<f64>>,
}

impl Scaled {
    fn centre(&self, lambda: &[f64]) -> (f64, f64) {
        let n = self.pts.len() as f64;
        let mut w = n;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (i, &(x, y)) in self.pts.iter().enumerate() {
            let wi = 1.0 + lambda[i];
            sx += wi * x;
            sy += wi * y;
            w += lambda[i];
        }
        (sx / w, sy / w)
    }

    fn dual(&self, lambda: &[f64]) -> f64 {
        let n = self.pts.len() as f64;
        let w = n + lambda.iter().sum::<f64>();
        let (mut qx, mut qy, mut r) = (0.0, 0.0, 0.0);
        for (i, &(x, y)) in self.pts.iter().enumerate() {
            let wi = 1.0 + lambda[i];
            qx += wi * x;
            qy += wi * y;
            r += x * x + y * y;
            if let Some(rho2) = self.rho2[i] {
                r += lambda[i] * (x * x + y * y - rho2);
            }
        }
        r - (qx * qx + qy * qy) / w
    }

    fn grad(&self, s: (f64, f64)) -> Vec<f64> {
        self.pts
            .iter()
            .zip(&self.rho2)
            .map(|(&(x, y), rho2)| match rho2 {
                Some(r2) => (s.0 - x).powi(2) + (s.1 - y).powi(2) - r2,
                None => 0.0,
            })
            .collect()
    }

    fn primal(&self, s: (f64, f64)) -> f64 {
        self.pts.iter().map(|&(x, y)| (s.0 - x).powi(2) + (s.1 - y).powi(2)).sum()
    }
}

/// Solve the fixed-altitude QCQP for ground points `pts` with horizontal
/// power radii `rho` (`None` leaves a point unconstrained).
pub fn solve_dual(pts: &[(f64, f64)], rho: &[Option<f64>]) -> Result<DualSolution, QcqpError> {
    let n = pts.len();
    assert!(n > 0 && rho.len() == n, "one radius per point");
    for (i, r) in rho.iter().enumerate() {
        if matches!(r, Some(v) if !(*v >= 0.0)) {
            return Err(QcqpError::RadiusBelowAltitude(i));
        }
    }
    for i in 0..n {
        for k in i + 1..n {
            if let (Some(ri), Some(rk)) = (rho[i], rho[k]) {
                let gap = ((pts[i].0 - pts[k].0).powi(2) + (pts[i].1 - pts[k].1).powi(2)).sqrt();
                if gap > ri + rk {
                    return Err(QcqpError::DisjointPair(i, k));
                }
            }
        }
    }

    // centre and scale so that the iteration works on O(1) numbers
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let spread = pts.iter().map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()).fold(0.0, f64::max);
    let scale = spread.max(rho.iter().flatten().fold(0.0, |a: f64, &b| a.max(b))).max(1.0);
    let sc = Scaled {
        pts: pts.iter().map(|p| ((p.0 - cx) / scale, (p.1 - cy) / scale)).collect(),
        rho2: rho.iter().map(|r| r.map(|v| (v / scale).powi(2))).collect(),
    };
    let unscale = |s: (f64, f64)| (s.0 * scale + cx, s.1 * scale + cy);
    let violation = |s: (f64, f64)| {
        pts.iter()
            .zip(rho)
            .filter_map(|(p, r)| r.map(|r| ((s.0 - p.0).powi(2) + (s.1 - p.1).powi(2)).sqrt() - r))
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    };

    let mut lambda = vec![0.0; n];
    let mut s = sc.centre(&lambda);
    let mut g = sc.grad(s);
    if g.iter().all(|&v| v <= 0.0) {
        let primal = sc.primal(s) * scale * scale;
        return Ok(DualSolution {
            s: unscale(s),
            lambda,
            primal,
            dual: primal,
            iterations: 0,
            max_violation_m: 0.0,
        });
    }

    let mut f = sc.dual(&lambda);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        if let Some((l_old, g_old)) = &prev {
            let (mut sy, mut ss) = (0.0, 0.0);
            for i in 0..n {
                let dl = lambda[i] - l_old[i];
                let dg = g[i] - g_old[i];
                ss += dl * dl;
                sy += dl * dg;
            }
            // concave ascent: curvature along the step is negative
            if sy < 0.0 {
                step = (ss / -sy).clamp(1e-8, 1e8);
            }
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let trial: Vec<f64> = lambda.iter().zip(&g).map(|(l, gi)| (l + t * gi).max(0.0)).collect();
            let rise: f64 = trial.iter().zip(&lambda).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            let ft = sc.dual(&trial);
            if ft >= f + 1e-4 * rise {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, f_next)) = accepted else { break };
        prev = Some((std::mem::replace(&mut lambda, next), g));
        f = f_next;
        s = sc.centre(&lambda);
        g = sc.grad(s);

        if lambda.iter().sum::<f64>() > LAMBDA_BLOWUP {
            return Err(QcqpError::Unbounded);
        }
        let primal = sc.primal(s);
        let feasible = g.iter().all(|&v| v <= GAP_TOL);
        if feasible && primal - f <= GAP_TOL * (1.0 + primal) {
            break;
        }
    }
    let primal = sc.primal(s) * scale * scale;
    let s_out = unscale(s);
    let max_violation_m = violation(s_out);
    if max_violation_m > 1e-3 * scale.max(1.0) && lambda.iter().sum::<f64>() > 1e6 {
        return Err(QcqpError::Unbounded);
    }
    Ok(DualSolution {
        s: s_out,
        lambda,
        primal,
        dual: f * scale * scale,
        iterations,
        max_violation_m,
    })
}
