//! Dense convex QP `min 1/2 x'Hx + f'x  s.t.  Ax <= b` by a primal-dual
//! interior-point method with Mehrotra predictor-corrector steps.
//!
//! Sized for the handful of variables and few dozen constraints of a
//! placement subproblem; `H` must be positive definite.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("interior-point iteration did not converge in {0} steps")]
    NotConverged(usize),
    #[error("reduced KKT matrix is not positive definite")]
    Singular,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of `Ax <= b`.
    pub z: DVector<f64>,
    pub iterations: usize,
}

const MAX_ITERS: usize = 200;
const TOL: f64 = 1e-11;

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = 1.0f64;
    for (a, da) in v.iter().zip(dv.iter()) {
        if *da < 0.0 {
            alpha = alpha.min(-a / da);
        }
    }
    alpha
}

pub fn solve_qp(h: &DMatrix<f64>, f: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<QpSolution, QpError> {
    let n = f.len();
    let m = b.len();
    let mut x = DVector::zeros(n);
    if m == 0 {
        let chol = h.clone().cholesky().ok_or(QpError::Singular)?;
        x = chol.solve(&(-f));
        return Ok(QpSolution { x, z: DVector::zeros(0), iterations: 1 });
    }
    let scale = 1.0 + f.amax() + h.amax() + b.amax();
    let mut s = (b - a * &x).map(|v| v.max(1.0));
    let mut z = DVector::from_element(m, 1.0);

    for iter in 1..=MAX_ITERS {
        let r_d = h * &x + f + a.transpose() * &z;
        let r_p = a * &x + &s - b;
        let mu = s.dot(&z) / m as f64;
        if r_d.amax() <= TOL * scale && r_p.amax() <= TOL * scale && mu <= TOL * scale {
            return Ok(QpSolution { x, z, iterations: iter - 1 });
        }

        let w = z.component_div(&s);
        let mut kkt = h.clone();
        for i in 0..m {
            let row = a.row(i);
            kkt += row.transpose() * row * w[i];
        }
        let chol = kkt.cholesky().ok_or(QpError::Singular)?;

        // Newton direction for complementarity residual r_c
        let direction = |r_c: &DVector<f64>| {
            let rhs = -&r_d - a.transpose() * (w.component_mul(&r_p) - r_c.component_div(&s));
            let dx = chol.solve(&rhs);
            let dz = w.component_mul(&(a * &dx + &r_p)) - r_c.component_div(&s);
            let ds = -(r_c + s.component_mul(&dz)).component_div(&z);
            (dx, ds, dz)
        };

        let r_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = direction(&r_aff);
        let alpha_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = (&s + &ds_a * alpha_aff).dot(&(&z + &dz_a * alpha_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let r_c = &r_aff + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz) = direction(&r_c);

        let alpha = (0.995 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
        s.iter_mut().for_each(|v| *v = v.max(1e-300));
        z.iter_mut().for_each(|v| *v = v.max(1e-300));
    }
    Err(QpError::NotConverged(MAX_ITERS))
}
