//! Device association and uplink power control.
//!
//! [`joint_power_association`] is the fixed-point iteration
//! `P_i <- min(gamma * min_j rho_ij, P_max)` with
//! `rho_ij = (sigma^2 + sum_{k in Z_i} P_k g_kj) / g_ij`, which is a standard
//! interference function and therefore converges monotonically from
//! `P = P_max`. [`interference_free_assignment`] solves the no-interference
//! case as an assignment problem. [`altitude_bounds`] gives the altitude band
//! in which a single link can close at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, AssignError, CostMatrix, INFEASIBLE};
use crate::geo::{avg_path_loss_unchecked, Environment, Vec3};

pub const MAX_POWER_ITERS: usize = 10_000;
/// Per-device relative power change below which the iteration stops.
pub const POWER_REL_TOL: f64 = 1e-10;
// slack on the cap when deciding whether a device is served
const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("devices {devices:?} cannot reach any UAV within the power cap")]
    Unservable { devices: Vec<usize>, partial: Box<PowerSolution> },
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("at least one UAV is required")]
    NoUavs,
}

/// SINR target (linear) and per-device transmit power cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosParams {
    pub gamma: f64,
    pub p_max_w: f64,
}

impl QosParams {
    pub fn new(gamma: f64, p_max_w: f64) -> Self {
        Self { gamma, p_max_w }
    }

    /// Largest average path loss a device can overcome without interference.
    pub fn max_pathloss(&self, env: &Environment) -> f64 {
        self.p_max_w / (self.gamma * env.noise_w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// Serving UAV of each device.
    pub assoc: Vec<usize>,
    pub power_w: Vec<f64>,
    pub served: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    /// Sum of all powers after each sweep.
    pub trace_w: Vec<f64>,
}

impl PowerSolution {
    pub fn empty() -> Self {
        Self {
            assoc: Vec::new(),
            power_w: Vec::new(),
            served: Vec::new(),
            converged: true,
            iterations: 0,
            trace_w: Vec::new(),
        }
    }

    /// Total transmit power of served devices.
    pub fn total_power_w(&self) -> f64 {
        self.power_w.iter().zip(&self.served).filter(|(_, &s)| s).fold(0.0, |a, (p, _)| a + p)
    }

    /// Total power including unserved devices pinned at the cap.
    pub fn objective_w(&self) -> f64 {
        self.power_w.iter().fold(0.0, |a, p| a + p)
    }

    pub fn n_served(&self) -> usize {
        self.served.iter().filter(|&&s| s).count()
    }

    pub fn all_served(&self) -> bool {
        self.served.iter().all(|&s| s)
    }

    pub fn unserved(&self) -> Vec<usize> {
        (0..self.served.len()).filter(|&i| !self.served[i]).collect()
    }

    /// Devices served by UAV `j`.
    pub fn members(&self, j: usize) -> Vec<usize> {
        (0..self.assoc.len()).filter(|&i| self.assoc[i] == j).collect()
    }
}

/// Row-major `L x K` table of average path losses.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossTable {
    n_uavs: usize,
    loss: Vec<f64>,
}

impl PathLossTable {
    pub fn build(devices: &[Vec3], uavs: &[Vec3], env: &Environment) -> Self {
        let loss = devices
            .iter()
            .flat_map(|d| uavs.iter().map(move |u| avg_path_loss_unchecked(d, u, env)))
            .collect();
        Self { n_uavs: uavs.len(), loss }
    }

    #[inline]
    pub fn get(&self, device: usize, uav: usize) -> f64 {
        self.loss[device * self.n_uavs + uav]
    }

    pub fn n_uavs(&self) -> usize {
        self.n_uavs
    }
}

/// Altitude band in which a UAV can close a single link at full power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AltitudeBand {
    Feasible { h_min_m: f64, h_max_m: f64 },
    /// The required LoS probability `q` is not attainable.
    Empty { q: f64 },
}

impl AltitudeBand {
    pub fn is_feasible(&self) -> bool {
        matches!(self, AltitudeBand::Feasible { .. })
    }
}

/// `(P_max / (gamma K_o^alpha sigma^2 eta_los))^(1/alpha)`.
pub fn max_altitude(env: &Environment, qos: &QosParams) -> f64 {
    (qos.p_max_w / (qos.gamma * env.k_o().powf(env.pathloss_exp) * env.noise_w * env.eta_los))
        .powf(1.0 / env.pathloss_exp)
}

/// Minimum LoS probability needed to close a link of length `d`.
pub fn required_los(d: f64, env: &Environment, qos: &QosParams) -> f64 {
    let a = qos.p_max_w / (qos.gamma * (env.k_o() * d).powf(env.pathloss_exp) * env.noise_w);
    (a - env.eta_nlos) / (env.eta_los - env.eta_nlos)
}

/// Altitude bounds for a link of 3-D length `d`.
///
/// A required LoS probability `q <= 0` leaves the lower bound vacuous
/// (`h_min = 0`); `q >= 1` means the link cannot close at any altitude.
pub fn altitude_bounds_at_distance(d: f64, env: &Environment, qos: &QosParams) -> AltitudeBand {
    let q = required_los(d, env, qos);
    if q >= 1.0 || q.is_nan() {
        return AltitudeBand::Empty { q };
    }
    let h_max_m = max_altitude(env, qos);
    let h_min_m = if q <= 0.0 {
        0.0
    } else {
        let theta_deg = (env.psi * q / (1.0 - q)).ln() / env.beta_env + env.psi;
        (d * theta_deg.clamp(0.0, 90.0).to_radians().sin()).max(0.0)
    };
    if h_min_m > h_max_m {
        AltitudeBand::Empty { q }
    } else {
        AltitudeBand::Feasible { h_min_m, h_max_m }
    }
}

pub fn altitude_bounds(device: &Vec3, uav: &Vec3, env: &Environment, qos: &QosParams) -> AltitudeBand {
    altitude_bounds_at_distance(device.distance(uav), env, qos)
}

/// Joint association and power control by fixed-point iteration.
///
/// `interferers[i]` is the co-channel set `Z_i`. Starts from `p0` or from
/// `P_max` for every device. Devices whose best UAV needs more than `P_max`
/// stay pinned at the cap, keep interfering, and are flagged unserved.
pub fn joint_power_association(
    uavs: &[Vec3],
    devices: &[Vec3],
    interferers: &[Vec<usize>],
    env: &Environment,
    qos: &QosParams,
    p0: Option<&[f64]>,
) -> PowerSolution {
    let n = devices.len();
    if n == 0 {
        return PowerSolution::empty();
    }
    assert!(!uavs.is_empty(), "at least one UAV is required");
    assert_eq!(interferers.len(), n, "one interference set per device");
    let table = PathLossTable::build(devices, uavs, env);
    joint_power_association_with_table(&table, interferers, env, qos, p0)
}

pub fn joint_power_association_with_table(
    table: &PathLossTable,
    interferers: &[Vec<usize>],
    env: &Environment,
    qos: &QosParams,
    p0: Option<&[f64]>,
) -> PowerSolution {
    let n = interferers.len();
    let k = table.n_uavs();
    let mut power: Vec<f64> = match p0 {
        Some(p) => p.to_vec(),
        None => vec![qos.p_max_w; n],
    };
    let mut assoc = vec![0usize; n];
    let mut served = vec![false; n];
    let mut next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_POWER_ITERS {
        iterations += 1;
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut best = f64::INFINITY;
            let mut best_j = 0;
            for j in 0..k {
                let interference: f64 = interferers[i].iter().map(|&m| power[m] / table.get(m, j)).sum();
                let rho = (env.noise_w + interference) * table.get(i, j);
                if rho < best {
                    best = rho;
                    best_j = j;
                }
            }
            let need = qos.gamma * best;
            assoc[i] = best_j;
            served[i] = need <= qos.p_max_w * (1.0 + CAP_SLACK);
            next[i] = need.min(qos.p_max_w);
            let change = (next[i] - power[i]).abs() / next[i].max(f64::MIN_POSITIVE);
            worst = worst.max(change);
        }
        std::mem::swap(&mut power, &mut next);
        trace.push(power.iter().sum());
        if worst <= POWER_REL_TOL {
            converged = true;
            break;
        }
    }
    PowerSolution { assoc, power_w: power, served, converged, iterations, trace_w: trace }
}

/// Association minimizing total path loss when no device shares a channel,
/// with each UAV replicated once per device so any UAV may serve everyone.
/// Powers are `gamma sigma^2 L_{i c_i}`.
pub fn interference_free_assignment(
    uavs: &[Vec3],
    devices: &[Vec3],
    env: &Environment,
    qos: &QosParams,
) -> Result<PowerSolution, AssocError> {
    let n = devices.len();
    if n == 0 {
        return Ok(PowerSolution::empty());
    }
    if uavs.is_empty() {
        return Err(AssocError::NoUavs);
    }
    let table = PathLossTable::build(devices, uavs, env);
    let limit = qos.max_pathloss(env);
    let k = uavs.len();
    let costs = CostMatrix::from_fn(n, k * n, |i, col| {
        let l = table.get(i, col / n);
        if l <= limit {
            l
        } else {
            INFEASIBLE
        }
    })?;

    let fixed_power = |i: usize, j: usize| qos.gamma * env.noise_w * table.get(i, j);
    match hungarian(&costs) {
        Ok(m) => {
            let assoc: Vec<usize> = (0..n).map(|i| m.row_to_col[i] / n).collect();
            let power_w = (0..n).map(|i| fixed_power(i, assoc[i])).collect::<Vec<_>>();
            let trace_w = vec![power_w.iter().sum()];
            Ok(PowerSolution { assoc, power_w, served: vec![true; n], converged: true, iterations: 1, trace_w })
        }
        Err(AssignError::Infeasible { assignment, .. }) => {
            let mut assoc = vec![0; n];
            let mut power_w = vec![0.0; n];
            let mut served = vec![true; n];
            for i in 0..n {
                let j = assignment[i] / n;
                if table.get(i, j) <= limit {
                    assoc[i] = j;
                    power_w[i] = fixed_power(i, j);
                } else {
                    assoc[i] = (0..k).min_by(|&a, &b| table.get(i, a).total_cmp(&table.get(i, b))).unwrap_or(0);
                    power_w[i] = qos.p_max_w;
                    served[i] = false;
                }
            }
            let devices: Vec<usize> = (0..n).filter(|&i| !served[i]).collect();
            let trace_w = vec![power_w.iter().sum()];
            let partial = PowerSolution { assoc, power_w, served, converged: true, iterations: 1, trace_w };
            Err(AssocError::Unservable { devices, partial: Box::new(partial) })
        }
        Err(e) => Err(e.into()),
    }
}
