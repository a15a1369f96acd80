//! Per-UAV 3-D placement with associations and powers held fixed.
//!
//! Without co-channel interference the problem at a fixed altitude is a
//! QCQP over the horizontal position, solved exactly through its dual
//! ([`qcqp_dual_place`]); the altitude is then picked from a grid using a
//! quadratic surrogate of the power curve ([`optimal_altitude`]). With
//! interference each UAV runs a local SQP ([`sqp_place`]). [`place_all`]
//! sweeps the UAVs one at a time and only keeps moves that lower the total
//! transmit power.

pub mod objective;
pub mod qcqp;
pub mod qp;
pub mod quadfit;
pub mod sqp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Environment, Vec3};
use crate::power::PowerSolution;
use crate::spectrum::ChannelMap;

pub use objective::UavProblem;
pub use qcqp::{solve_dual, DualSolution, QcqpError};
pub use quadfit::{fit_quadratic, power_radius, q_value, QuadFit, DEFAULT_FIT_SAMPLES};
pub use sqp::{sqp_place, SqpOptions, SqpOutcome, SqpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("no devices to place a UAV for")]
    NoDevices,
    #[error("no altitude on the grid admits a feasible position")]
    NoFeasibleAltitude,
    #[error("altitude grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Qcqp(#[from] QcqpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub position: Vec3,
    /// Exact total power of the UAV's devices at `position`.
    pub objective_w: f64,
    /// Multipliers of the per-device power constraints.
    pub dual_vars: Vec<f64>,
    pub iterations: usize,
    pub status: SqpStatus,
    pub kkt_residual: f64,
}

impl From<SqpOutcome> for PlacementResult {
    fn from(o: SqpOutcome) -> Self {
        Self {
            position: o.position,
            objective_w: o.objective_w,
            dual_vars: o.multipliers,
            iterations: o.iterations,
            status: o.status,
            kkt_residual: o.kkt_residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Admissible UAV altitudes, metres.
    pub altitude_bounds: (f64, f64),
    pub altitude_grid: usize,
    pub fit_samples: usize,
    pub sqp_max_iters: usize,
    pub sqp_trust_m: f64,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            altitude_bounds: (50.0, 500.0),
            altitude_grid: 21,
            fit_samples: DEFAULT_FIT_SAMPLES,
            sqp_max_iters: 100,
            sqp_trust_m: 100.0,
        }
    }
}

impl PlacementOptions {
    pub fn grid(&self) -> Vec<f64> {
        linspace(self.altitude_bounds.0, self.altitude_bounds.1, self.altitude_grid)
    }

    fn sqp(&self) -> SqpOptions {
        SqpOptions {
            max_iters: self.sqp_max_iters,
            trust_m: self.sqp_trust_m,
            altitude_bounds: self.altitude_bounds,
            ..SqpOptions::default()
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn interference_free_total(members: &[Vec3], v: &Vec3, env: &Environment, gamma: f64) -> f64 {
    members.iter().map(|u| q_value(u.distance(v), v.h - u.h, env, gamma)).sum()
}

/// Horizontal position at altitude `altitude_m` minimizing the summed
/// squared link distance, subject to each device with `caps[i] = Some(c)`
/// needing at most `c` watts. Devices are on the ground.
pub fn qcqp_dual_place(
    members: &[Vec3],
    altitude_m: f64,
    env: &Environment,
    gamma: f64,
    caps: &[Option<f64>],
) -> Result<PlacementResult, PlacementError> {
    if members.is_empty() {
        return Err(PlacementError::NoDevices);
    }
    assert_eq!(caps.len(), members.len(), "one cap per device");
    let mut rho = Vec::with_capacity(members.len());
    for (i, cap) in caps.iter().enumerate() {
        rho.push(match cap {
            None => None,
            Some(c) => {
                let eps = power_radius(altitude_m, *c, env, gamma).ok_or(QcqpError::RadiusBelowAltitude(i))?;
                Some((eps * eps - altitude_m * altitude_m).max(0.0).sqrt())
            }
        });
    }
    let pts: Vec<(f64, f64)> = members.iter().map(|u| (u.x, u.y)).collect();
    let sol = solve_dual(&pts, &rho)?;
    let position = Vec3::new(sol.s.0, sol.s.1, altitude_m);
    Ok(PlacementResult {
        position,
        objective_w: interference_free_total(members, &position, env, gamma),
        dual_vars: sol.lambda,
        iterations: sol.iterations,
        status: SqpStatus::Converged,
        kkt_residual: sol.primal - sol.dual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeChoice {
    pub altitude_m: f64,
    pub placement: PlacementResult,
    pub fit: QuadFit,
    /// Surrogate total `alpha1 sum d_i^2 + n alpha2` at the chosen point.
    pub score_w: f64,
}

/// Grid search over `h_grid`: at each altitude place by [`qcqp_dual_place`],
/// fit the power curve over the resulting link lengths and score the
/// position with the fitted quadratic. Infeasible altitudes are skipped.
pub fn optimal_altitude(
    members: &[Vec3],
    env: &Environment,
    gamma: f64,
    caps: &[Option<f64>],
    h_grid: &[f64],
    fit_samples: usize,
) -> Result<AltitudeChoice, PlacementError> {
    if members.is_empty() {
        return Err(PlacementError::NoDevices);
    }
    if h_grid.is_empty() {
        return Err(PlacementError::EmptyGrid);
    }
    let mut best: Option<AltitudeChoice> = None;
    for &h in h_grid {
        let Ok(placement) = qcqp_dual_place(members, h, env, gamma, caps) else {
            continue;
        };
        let d2: Vec<f64> = members.iter().map(|u| u.distance(&placement.position).powi(2)).collect();
        let d_lo = d2.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
        let d_hi = d2.iter().copied().fold(0.0, f64::max).sqrt();
        let fit = fit_quadratic(h, env, gamma, (d_lo, d_hi), fit_samples);
        let score_w = fit.alpha1 * d2.iter().sum::<f64>() + members.len() as f64 * fit.alpha2;
        if best.as_ref().is_none_or(|b| score_w < b.score_w) {
            best = Some(AltitudeChoice { altitude_m: h, placement, fit, score_w });
        }
    }
    best.ok_or(PlacementError::NoFeasibleAltitude)
}

/// Placement problem of UAV `j` under the current power vector.
pub fn uav_problem(
    j: usize,
    devices: &[Vec3],
    sol: &PowerSolution,
    power_w: &[f64],
    map: &ChannelMap,
    env: &Environment,
    gamma: f64,
) -> (Vec<usize>, UavProblem) {
    let members = sol.members(j);
    let sets = map.interference_sets();
    let interferers = members
        .iter()
        .map(|&i| sets[i].iter().map(|&k| (devices[k], power_w[k])).collect())
        .collect();
    let prob = UavProblem { members: members.iter().map(|&i| devices[i]).collect(), interferers, env: *env, gamma };
    (members, prob)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub uav_locs: Vec<Vec3>,
    /// Per-device power with unserved devices pinned at the cap.
    pub power_w: Vec<f64>,
    pub served: Vec<bool>,
    /// Candidate placement per UAV, `None` for UAVs without devices.
    pub results: Vec<Option<PlacementResult>>,
    pub accepted: Vec<bool>,
    /// Total power before the sweep and after each UAV step.
    pub trace_w: Vec<f64>,
}

// per-device slack on the power caps and minimum relative gain for a move
const CAP_TOL: f64 = 1e-6;
const GAIN_TOL: f64 = 1e-9;

/// Move each UAV in index order with associations fixed.
///
/// `caps[i]` bounds the power of device `i` after its UAV moves; a device
/// already above its cap only has to not get worse. A move is kept when no
/// device exceeds its cap and the total power drops; the powers of the
/// moved UAV's devices are then recomputed and feed the next UAV's
/// interference terms.
#[allow(clippy::too_many_arguments)]
pub fn place_all(
    uav_locs: &[Vec3],
    devices: &[Vec3],
    sol: &PowerSolution,
    map: &ChannelMap,
    env: &Environment,
    gamma: f64,
    p_max_w: f64,
    caps: &[f64],
    opts: &PlacementOptions,
) -> SweepOutcome {
    assert_eq!(caps.len(), devices.len(), "one cap per device");
    let mut locs = uav_locs.to_vec();
    let mut power = sol.power_w.clone();
    let mut served = sol.served.clone();
    let mut total: f64 = power.iter().sum();
    let mut trace = vec![total];
    let mut results = Vec::with_capacity(locs.len());
    let mut accepted = Vec::with_capacity(locs.len());
    let free = map.interference_free();
    let grid = opts.grid();

    for j in 0..locs.len() {
        let (members, prob) = uav_problem(j, devices, sol, &power, map, env, gamma);
        if members.is_empty() {
            results.push(None);
            accepted.push(false);
            trace.push(total);
            continue;
        }
        let start = locs[j];
        let start_powers = prob.powers(&start);
        let limits: Vec<f64> = members.iter().zip(&start_powers).map(|(&i, &f)| caps[i].max(f)).collect();

        let candidate = if free {
            let qcaps: Vec<Option<f64>> =
                members.iter().zip(&limits).map(|(&i, &c)| served[i].then_some(c)).collect();
            optimal_altitude(&prob.members, env, gamma, &qcaps, &grid, opts.fit_samples).ok().map(|c| c.placement)
        } else {
            Some(sqp_place(&prob, &limits, start, &opts.sqp()).into())
        };

        let mut keep = false;
        if let Some(res) = &candidate {
            let new_powers = prob.powers(&res.position);
            let within = members
                .iter()
                .zip(&new_powers)
                .zip(&limits)
                .all(|((&i, &f), &c)| !served[i] || f <= c * (1.0 + CAP_TOL));
            let old_sum: f64 = members.iter().map(|&i| power[i]).sum();
            let new_sum: f64 = new_powers.iter().map(|f| f.min(p_max_w)).sum();
            let new_total = total - old_sum + new_sum;
            if within && new_total < total - GAIN_TOL * total {
                keep = true;
                locs[j] = res.position;
                for (&i, &f) in members.iter().zip(&new_powers) {
                    power[i] = f.min(p_max_w);
                    served[i] = f <= p_max_w * (1.0 + 1e-12);
                }
                total = power.iter().sum();
            }
        }
        assert!(total <= trace[trace.len() - 1], "placement sweep increased total power");
        trace.push(total);
        results.push(candidate);
        accepted.push(keep);
    }
    SweepOutcome { uav_locs: locs, power_w: power, served, results, accepted, trace_w: trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma() -> f64 {
        10f64.powf(0.5)
    }

    #[test]
    fn single_device_sits_overhead() {
        let env = Environment::urban();
        let u = [Vec3::ground(30.0, -20.0)];
        let res = qcqp_dual_place(&u, 120.0, &env, gamma(), &[Some(0.2)]).unwrap();
        assert_eq!((res.position.x, res.position.y), (30.0, -20.0));
    }

    #[test]
    fn single_device_altitude_matches_vertical_scan() {
        let env = Environment::urban();
        let grid = linspace(50.0, 500.0, 21);
        let choice = optimal_altitude(&[Vec3::ground(0.0, 0.0)], &env, gamma(), &[Some(0.2)], &grid, 201).unwrap();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| q_value(*a, *a, &env, gamma()).total_cmp(&q_value(*b, *b, &env, gamma())))
            .unwrap();
        assert_eq!(choice.altitude_m, best);
    }

    #[test]
    fn grid_of_one_altitude() {
        let env = Environment::urban();
        let u = [Vec3::ground(0.0, 0.0), Vec3::ground(100.0, 0.0)];
        let c = optimal_altitude(&u, &env, gamma(), &[None, None], &[222.0], 51).unwrap();
        assert_eq!(c.altitude_m, 222.0);
    }

    #[test]
    fn halving_grid_spacing_is_stable() {
        let env = Environment::urban();
        let u = [Vec3::ground(0.0, 0.0), Vec3::ground(300.0, 50.0), Vec3::ground(120.0, 260.0)];
        let caps = [Some(0.2); 3];
        let coarse = linspace(50.0, 500.0, 11);
        let fine = linspace(50.0, 500.0, 21);
        let a = optimal_altitude(&u, &env, gamma(), &caps, &coarse, 101).unwrap();
        let b = optimal_altitude(&u, &env, gamma(), &caps, &fine, 101).unwrap();
        assert!((a.altitude_m - b.altitude_m).abs() <= coarse[1] - coarse[0]);
    }

    #[test]
    fn sqp_agrees_with_qcqp_without_interference() {
        // equal excess losses make the power a pure function of distance
        let env = Environment { eta_los: 10.0, eta_nlos: 10.0, ..Environment::urban() };
        let u = vec![Vec3::ground(0.0, 0.0), Vec3::ground(200.0, 30.0), Vec3::ground(60.0, 180.0)];
        let h = 150.0;
        let q = qcqp_dual_place(&u, h, &env, gamma(), &[None, None, None]).unwrap();
        let prob = UavProblem { members: u.clone(), interferers: vec![vec![]; 3], env, gamma: gamma() };
        let start = Vec3::new(400.0, -100.0, h);
        let caps = prob.powers(&start);
        let opts = SqpOptions { fixed_altitude: true, ..Default::default() };
        let s = sqp_place(&prob, &caps, start, &opts);
        assert!(s.position.horizontal_distance(&q.position) < 1.0, "{:?} vs {:?}", s.position, q.position);
    }
}
