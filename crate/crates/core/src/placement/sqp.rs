//! Sequential quadratic programming for one UAV position under co-channel
//! interference.
//!
//! Minimizes `sum_i F_i(v)` subject to `F_i(v) <= cap_i`, where `F_i` is the
//! power device `i` needs at UAV position `v` with interferer powers held
//! fixed. Every accepted iterate is feasible, so the l1 merit function
//! coincides with the objective along the path. When the standard QP step
//! cannot be made feasible by backtracking (all caps are usually tight at
//! the start), a tilted subproblem yields a strictly feasible descent
//! direction instead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::objective::UavProblem;
use super::qp::solve_qp;
use crate::geo::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub max_iters: usize,
    /// Stop once the QP step is shorter than this, metres.
    pub step_tol_m: f64,
    /// Half-width of the box trust region, metres.
    pub trust_m: f64,
    pub altitude_bounds: (f64, f64),
    pub fixed_altitude: bool,
    /// Central-difference step for the Hessian, metres.
    pub fd_step_m: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            step_tol_m: 1e-6,
            trust_m: 100.0,
            altitude_bounds: (50.0, 500.0),
            fixed_altitude: false,
            fd_step_m: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Converged,
    StepUnderflow,
    MaxIterations,
    /// No feasible descent from the start; position unchanged.
    NoProgress,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpOutcome {
    pub position: Vec3,
    pub objective_w: f64,
    /// Multipliers of the per-device power caps (scaled problem).
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub status: SqpStatus,
    pub kkt_residual: f64,
}

const FEAS_TOL: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MIN_ALPHA: f64 = 1e-6;

struct Scaled<'a> {
    prob: &'a UavProblem,
    caps: &'a [f64],
    f0: f64,
    dims: usize,
    altitude: f64,
}

struct Eval {
    f: f64,
    g: Vec<f64>,
    c: Vec<f64>,
    jac: Vec<Vec<f64>>,
}

impl Scaled<'_> {
    fn point(&self, x: &[f64]) -> Vec3 {
        Vec3::new(x[0], x[1], if self.dims == 3 { x[2] } else { self.altitude })
    }

    fn eval(&self, x: &[f64]) -> Eval {
        let v = self.point(x);
        let m = self.prob.len();
        let mut f = 0.0;
        let mut g = vec![0.0; self.dims];
        let mut c = Vec::with_capacity(m);
        let mut jac = Vec::with_capacity(m);
        for i in 0..m {
            let (fi, gi) = self.prob.power_and_grad(i, &v);
            f += fi / self.f0;
            for a in 0..self.dims {
                g[a] += gi[a] / self.f0;
            }
            c.push(fi / self.caps[i] - 1.0);
            jac.push((0..self.dims).map(|a| gi[a] / self.caps[i]).collect());
        }
        Eval { f, g, c, jac }
    }

    fn lagrangian_grad(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        let e = self.eval(x);
        let mut out = e.g;
        for (row, l) in e.jac.iter().zip(lambda) {
            for a in 0..self.dims {
                out[a] += l * row[a];
            }
        }
        out
    }

    /// Central-difference Hessian of the Lagrangian, shifted to be positive
    /// definite.
    fn hessian(&self, x: &[f64], lambda: &[f64], h: f64) -> DMatrix<f64> {
        let n = self.dims;
        let mut hess = DMatrix::zeros(n, n);
        for a in 0..n {
            let mut lo = x.to_vec();
            let mut hi = x.to_vec();
            lo[a] -= h;
            hi[a] += h;
            let gl = self.lagrangian_grad(&lo, lambda);
            let gh = self.lagrangian_grad(&hi, lambda);
            for b in 0..n {
                hess[(b, a)] = (gh[b] - gl[b]) / (2.0 * h);
            }
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        let floor = 1e-6;
        if min_eig < floor {
            sym + DMatrix::identity(n, n) * (floor - min_eig.min(0.0))
        } else {
            sym
        }
    }
}

fn box_rows(x: &[f64], dims: usize, trust: f64, alt: (f64, f64), a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>, width: usize) {
    for k in 0..dims {
        let mut up = vec![0.0; width];
        up[k] = 1.0;
        let mut down = vec![0.0; width];
        down[k] = -1.0;
        let (mut hi, mut lo) = (trust, trust);
        if k == 2 {
            hi = hi.min(alt.1 - x[2]).max(0.0);
            lo = lo.min(x[2] - alt.0).max(0.0);
        }
        a.push(up);
        b.push(hi);
        a.push(down);
        b.push(lo);
    }
}

fn to_dense(rows: &[Vec<f64>], width: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c])
}

pub fn sqp_place(prob: &UavProblem, caps: &[f64], start: Vec3, opts: &SqpOptions) -> SqpOutcome {
    assert_eq!(caps.len(), prob.len());
    let dims = if opts.fixed_altitude { 2 } else { 3 };
    let m = prob.len();
    let start_total = prob.total(&start);
    let unchanged = |status, kkt| SqpOutcome {
        position: start,
        objective_w: start_total,
        multipliers: vec![0.0; m],
        iterations: 0,
        status,
        kkt_residual: kkt,
    };
    if m == 0 || !(start_total > 0.0) {
        return unchanged(SqpStatus::Converged, 0.0);
    }
    let sc = Scaled { prob, caps, f0: start_total, dims, altitude: start.h };
    let mut x: Vec<f64> = if dims == 3 { vec![start.x, start.y, start.h] } else { vec![start.x, start.y] };
    let mut lambda = vec![0.0; m];
    let mut trust = opts.trust_m;
    let mut iterations = 0;
    let mut status = SqpStatus::MaxIterations;
    let mut kkt = f64::INFINITY;
    let mut cur = sc.eval(&x);

    for _ in 0..opts.max_iters {
        let hess = sc.hessian(&x, &lambda, opts.fd_step_m);
        let g = DVector::from_vec(cur.g.clone());

        // standard subproblem: linearized caps plus trust box
        let mut rows: Vec<Vec<f64>> = cur.jac.clone();
        let mut rhs: Vec<f64> = cur.c.iter().map(|c| -c).collect();
        box_rows(&x, dims, trust, opts.altitude_bounds, &mut rows, &mut rhs, dims);
        let Ok(qp) = solve_qp(&hess, &g, &to_dense(&rows, dims), &DVector::from_vec(rhs)) else {
            status = SqpStatus::StepUnderflow;
            break;
        };
        let d0: Vec<f64> = qp.x.iter().copied().collect();
        let mults: Vec<f64> = qp.z.iter().take(m).map(|z| z.max(0.0)).collect();

        // stationarity of the Lagrangian over the device caps
        let mut stat = cur.g.clone();
        for (row, z) in cur.jac.iter().zip(&mults) {
            for a in 0..dims {
                stat[a] += z * row[a];
            }
        }
        kkt = stat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

        let step_len = d0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if step_len <= opts.step_tol_m {
            lambda = mults;
            status = SqpStatus::Converged;
            break;
        }

        let slope: f64 = cur.g.iter().zip(&d0).map(|(a, b)| a * b).sum();
        let mut next = line_search(&sc, &x, &d0, cur.f, slope);
        if next.is_none() {
            if let Some(d1) = tilted_direction(&sc, &x, &cur, &hess, trust, opts) {
                let slope1: f64 = cur.g.iter().zip(&d1).map(|(a, b)| a * b).sum();
                if slope1 < 0.0 {
                    next = line_search(&sc, &x, &d1, cur.f, slope1);
                }
            }
        }
        let Some((x_new, e_new, alpha)) = next else {
            status = SqpStatus::StepUnderflow;
            break;
        };
        x = x_new;
        cur = e_new;
        lambda = mults;
        iterations += 1;
        if alpha == 1.0 && step_len >= 0.99 * trust {
            trust = (trust * 2.0).min(10.0 * opts.trust_m);
        } else if alpha < 1.0 {
            trust = (trust * 0.5).max(10.0 * opts.step_tol_m);
        }
    }

    if iterations == 0 && status != SqpStatus::Converged {
        return unchanged(SqpStatus::NoProgress, kkt);
    }
    let position = sc.point(&x);
    SqpOutcome {
        position,
        objective_w: prob.total(&position),
        multipliers: lambda,
        iterations,
        status,
        kkt_residual: kkt,
    }
}

fn line_search(sc: &Scaled, x: &[f64], d: &[f64], f: f64, slope: f64) -> Option<(Vec<f64>, Eval, f64)> {
    if !(slope < 0.0) {
        return None;
    }
    let mut alpha = 1.0;
    while alpha >= MIN_ALPHA {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let e = sc.eval(&trial);
        let feasible = e.c.iter().all(|&c| c <= FEAS_TOL);
        if feasible && e.f <= f + ARMIJO * alpha * slope && e.f < f {
            return Some((trial, e, alpha));
        }
        alpha *= 0.5;
    }
    None
}

/// `min t + 1/2 d'Bd  s.t.  g'd <= t,  c_i + a_i'd <= t`, whose solution
/// with `t < 0` points strictly into the feasible set and downhill.
fn tilted_direction(sc: &Scaled, x: &[f64], cur: &Eval, hess: &DMatrix<f64>, trust: f64, opts: &SqpOptions) -> Option<Vec<f64>> {
    let n = sc.dims;
    let w = n + 1;
    let mut h = DMatrix::zeros(w, w);
    h.view_mut((0, 0), (n, n)).copy_from(hess);
    h[(n, n)] = 1e-8;
    let mut f = DVector::zeros(w);
    f[n] = 1.0;

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut obj_row = cur.g.clone();
    obj_row.push(-1.0);
    rows.push(obj_row);
    rhs.push(0.0);
    for (row, c) in cur.jac.iter().zip(&cur.c) {
        let mut r = row.clone();
        r.push(-1.0);
        rows.push(r);
        rhs.push(-c);
    }
    box_rows(x, n, trust, opts.altitude_bounds, &mut rows, &mut rhs, w);
    let sol = solve_qp(&h, &f, &to_dense(&rows, w), &DVector::from_vec(rhs)).ok()?;
    (sol.x[n] < 0.0).then(|| sol.x.iter().take(n).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Environment;

    fn problem(members: Vec<Vec3>, interferers: Vec<Vec<(Vec3, f64)>>) -> UavProblem {
        UavProblem { members, interferers, env: Environment::urban(), gamma: 10f64.powf(0.5) }
    }

    #[test]
    fn converged_start_does_not_move() {
        // a single interference-free device: optimum straight overhead at
        // the lowest admissible altitude
        let prob = problem(vec![Vec3::ground(0.0, 0.0)], vec![vec![]]);
        let start = Vec3::new(0.0, 0.0, 50.0);
        let caps = prob.powers(&start);
        let out = sqp_place(&prob, &caps, start, &SqpOptions::default());
        assert_eq!(out.iterations, 0);
        assert_eq!(out.position, start);
        assert_eq!(out.status, SqpStatus::Converged);
    }

    #[test]
    fn descends_and_keeps_caps() {
        let members = vec![Vec3::ground(0.0, 0.0), Vec3::ground(90.0, 20.0), Vec3::ground(40.0, 100.0)];
        let interferers = vec![
            vec![(Vec3::ground(700.0, 0.0), 1e-7)],
            vec![(Vec3::ground(-500.0, 300.0), 2e-7)],
            vec![],
        ];
        let prob = problem(members, interferers);
        let start = Vec3::new(200.0, -150.0, 300.0);
        let caps = prob.powers(&start);
        let out = sqp_place(&prob, &caps, start, &SqpOptions::default());
        assert!(out.iterations > 0);
        assert!(out.objective_w < 0.5 * prob.total(&start));
        for (p, cap) in prob.powers(&out.position).iter().zip(&caps) {
            assert!(*p <= cap * (1.0 + 1e-6));
        }
        assert!(out.multipliers.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn fixed_altitude_keeps_height() {
        let prob = problem(vec![Vec3::ground(0.0, 0.0), Vec3::ground(100.0, 0.0)], vec![vec![], vec![]]);
        let start = Vec3::new(300.0, 200.0, 180.0);
        let caps = prob.powers(&start);
        let opts = SqpOptions { fixed_altitude: true, ..Default::default() };
        let out = sqp_place(&prob, &caps, start, &opts);
        assert_eq!(out.position.h, 180.0);
        assert!((out.position.x - 50.0).abs() < 1.0 && out.position.y.abs() < 1.0, "{:?}", out.position);
    }
}
