//! Alternating optimization of association, power and UAV positions, and
//! the simulations built on it.
//!
//! One snapshot alternates joint association and power control at fixed
//! positions with a placement sweep at fixed association, keeping only
//! steps that lower the total power. The horizon simulation repeats this at
//! every update time and flies the fleet between consecutive stop sets.

mod horizon;
mod oracle;

pub use horizon::{reliability, simulate_horizon, stationary_baseline, HorizonRun, ReliabilityMode};
pub use oracle::{brute_force_oracle, OracleGrid};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{ActivationError, ActivationModel};
use crate::geo::{ChannelError, Environment, Vec3};
use crate::mobility::{AirframeParams, MobilityError};
use crate::placement::{optimal_altitude, place_all, PlacementOptions};
use crate::power::{
    interference_free_assignment, joint_power_association, max_altitude, AssocError, PowerSolution, QosParams,
};
use crate::spectrum::ChannelMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{0} must be positive")]
    ZeroCount(&'static str),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Activation(#[from] ActivationError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// Per-device power bound handed to each placement sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapRule {
    /// The power cap on a cold start, then each device's current power.
    /// Maps without co-channel devices always use the power cap since a
    /// move cannot raise anyone else's power.
    #[default]
    Tighten,
    /// Always the power cap.
    CapOnly,
}

/// Limits of the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterOptions {
    pub max_iters: usize,
    /// Halvings of a rejected placement step before giving up.
    pub max_halvings: usize,
    pub cap_rule: CapRule,
    /// Stop once an iteration lowers the total power by less than this
    /// fraction.
    pub rel_tol: f64,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self { max_iters: 50, max_halvings: 6, cap_rule: CapRule::default(), rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Width and height of the deployment area, metres.
    pub area_m: (f64, f64),
    pub devices: Vec<Vec3>,
    pub n_uavs: usize,
    pub n_channels: usize,
    pub env: Environment,
    pub qos: QosParams,
    pub activation: ActivationModel,
    pub airframe: AirframeParams,
    /// Flight energy budget of each UAV, joules.
    pub e_max_j: f64,
    pub placement: PlacementOptions,
    pub outer: OuterOptions,
}

impl Scenario {
    /// Urban scenario with the reference link budget: 200 mW cap, 5 dB SINR
    /// target, beta(3, 4) activations over one hour.
    pub fn urban(area_m: (f64, f64), devices: Vec<Vec3>, n_uavs: usize, n_channels: usize) -> Self {
        Self {
            area_m,
            devices,
            n_uavs,
            n_channels,
            env: Environment::urban(),
            qos: QosParams::new(10f64.powf(0.5), 0.2),
            activation: ActivationModel::beta(3.0, 4.0, 3600.0),
            airframe: AirframeParams::default(),
            e_max_j: 500e3,
            placement: PlacementOptions::default(),
            outer: OuterOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_uavs == 0 {
            return Err(ScenarioError::ZeroCount("n_uavs"));
        }
        if self.n_channels == 0 {
            return Err(ScenarioError::ZeroCount("n_channels"));
        }
        if !(self.area_m.0 > 0.0 && self.area_m.1 > 0.0 && self.area_m.0.is_finite() && self.area_m.1.is_finite()) {
            return Err(ScenarioError::Invalid(format!("area must be positive, got {:?}", self.area_m)));
        }
        if !(self.qos.gamma > 0.0 && self.qos.p_max_w > 0.0) {
            return Err(ScenarioError::Invalid("SINR target and power cap must be positive".into()));
        }
        if !(self.e_max_j >= 0.0) {
            return Err(ScenarioError::Invalid(format!("energy budget must be non-negative, got {}", self.e_max_j)));
        }
        let (lo, hi) = self.placement.altitude_bounds;
        if !(lo > 0.0 && hi >= lo) || self.placement.altitude_grid == 0 {
            return Err(ScenarioError::Invalid(format!("bad altitude range ({lo}, {hi})")));
        }
        if let Some(d) = self.devices.iter().find(|d| !d.is_finite()) {
            return Err(ScenarioError::Invalid(format!("device position {d:?} is not finite")));
        }
        self.env.validate()?;
        self.activation.validate(self.devices.len())?;
        self.airframe.validate()?;
        Ok(())
    }

    /// Altitude range actually searched: the configured bounds capped by the
    /// highest altitude at which a single link can still close.
    pub fn altitude_band(&self) -> (f64, f64) {
        let (lo, hi) = self.placement.altitude_bounds;
        let top = hi.min(max_altitude(&self.env, &self.qos)).max(lo);
        (lo, top)
    }

    pub fn snapshot_options(&self) -> SnapshotOptions {
        SnapshotOptions {
            placement: PlacementOptions { altitude_bounds: self.altitude_band(), ..self.placement },
            outer: self.outer,
        }
    }

    /// Grid start positions at the middle of the altitude band.
    pub fn grid_locations(&self) -> Vec<Vec3> {
        let (lo, hi) = self.altitude_band();
        grid_locations(self.area_m, self.n_uavs, 0.5 * (lo + hi))
    }
}

/// Ground devices uniformly distributed over `[0, w] x [0, h]`.
pub fn uniform_devices(n: usize, area_m: (f64, f64), seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vec3::ground(rng.random_range(0.0..area_m.0), rng.random_range(0.0..area_m.1)))
        .collect()
}

/// `round(sqrt k)` rows of cells with the UAVs shared out as evenly as
/// possible, earlier rows taking the extra ones; each UAV sits at the
/// centre of its cell.
pub fn grid_locations(area_m: (f64, f64), k: usize, altitude_m: f64) -> Vec<Vec3> {
    if k == 0 {
        return Vec::new();
    }
    let rows = ((k as f64).sqrt().round() as usize).max(1);
    let mut out = Vec::with_capacity(k);
    for r in 0..rows {
        let in_row = k / rows + usize::from(r < k % rows);
        for c in 0..in_row {
            out.push(Vec3::new(
                (c as f64 + 0.5) * area_m.0 / in_row as f64,
                (r as f64 + 0.5) * area_m.1 / rows as f64,
                altitude_m,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotOptions {
    pub placement: PlacementOptions,
    pub outer: OuterOptions,
}

/// Optimal association and powers for fixed UAV positions: an assignment
/// problem when no two devices share a channel, the power-control fixed
/// point otherwise.
pub fn associate(
    uavs: &[Vec3],
    devices: &[Vec3],
    map: &ChannelMap,
    env: &Environment,
    qos: &QosParams,
    p0: Option<&[f64]>,
) -> PowerSolution {
    if devices.is_empty() {
        return PowerSolution::empty();
    }
    if map.interference_free() {
        match interference_free_assignment(uavs, devices, env, qos) {
            Ok(sol) => return sol,
            Err(AssocError::Unservable { partial, .. }) => return *partial,
            Err(_) => {}
        }
    }
    joint_power_association(uavs, devices, &map.interference_sets(), env, qos, p0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub t_n: f64,
    /// Indices of the active devices into the scenario device list.
    pub active: Vec<usize>,
    pub uav_locs: Vec<Vec3>,
    /// Association and powers indexed like `active`.
    pub solution: PowerSolution,
    pub channel_map: ChannelMap,
    /// Total power of served devices.
    pub total_power_w: f64,
    /// Total power with unserved devices counted at the cap.
    pub objective_w: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Objective before the first and after every outer iteration.
    pub trace_w: Vec<f64>,
}

impl Deployment {
    fn new(uav_locs: Vec<Vec3>, solution: PowerSolution, channel_map: ChannelMap) -> Self {
        let n = solution.assoc.len();
        Self {
            t_n: 0.0,
            active: (0..n).collect(),
            total_power_w: solution.total_power_w(),
            objective_w: solution.objective_w(),
            trace_w: vec![solution.objective_w()],
            uav_locs,
            solution,
            channel_map,
            outer_iterations: 0,
            converged: true,
        }
    }

    /// Replace the solution, keeping the totals in sync.
    pub fn set_solution(&mut self, solution: PowerSolution) {
        self.total_power_w = solution.total_power_w();
        self.objective_w = solution.objective_w();
        self.solution = solution;
    }
}

/// Association and powers at fixed positions, without placement.
pub fn fixed_snapshot(
    devices: &[Vec3],
    map: &ChannelMap,
    uav_locs: &[Vec3],
    env: &Environment,
    qos: &QosParams,
) -> Deployment {
    Deployment::new(uav_locs.to_vec(), associate(uav_locs, devices, map, env, qos, None), map.clone())
}

/// Send every UAV without members above the costliest device not already
/// picked, at that device's best single-link altitude. Returns whether any
/// UAV was sent.
fn reseed_idle(
    locs: &mut [Vec3],
    devices: &[Vec3],
    sol: &PowerSolution,
    power_w: &[f64],
    env: &Environment,
    qos: &QosParams,
    opts: &PlacementOptions,
) -> bool {
    let mut idle: Vec<usize> = (0..locs.len()).filter(|&j| !sol.assoc.contains(&j)).collect();
    if idle.is_empty() {
        return false;
    }
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.sort_by(|&a, &b| power_w[b].total_cmp(&power_w[a]).then(a.cmp(&b)));
    let grid = opts.grid();
    let mut moved = false;
    for i in order {
        let Some(j) = idle.first().copied() else { break };
        if let Ok(choice) = optimal_altitude(&devices[i..=i], env, qos.gamma, &[None], &grid, opts.fit_samples) {
            locs[j] = choice.placement.position;
            idle.remove(0);
            moved = true;
        }
    }
    moved
}

/// Alternate association and placement from `init` until an iteration gains
/// less than `rel_tol` or the iteration limit is hit.
///
/// Each sweep proposes new positions; the step from the current positions
/// is halved until re-association lowers the total power by at least the
/// tolerance, and the iteration is discarded if no step does. The returned
/// positions are therefore a fixed point of one more call with
/// `relax_first` unset.
pub fn optimize_snapshot(
    devices: &[Vec3],
    map: &ChannelMap,
    init: &[Vec3],
    env: &Environment,
    qos: &QosParams,
    opts: &SnapshotOptions,
    relax_first: bool,
) -> Deployment {
    let mut dep = fixed_snapshot(devices, map, init, env, qos);
    if devices.is_empty() {
        return dep;
    }
    let mut obj = dep.objective_w;
    dep.converged = false;
    for it in 0..opts.outer.max_iters {
        dep.outer_iterations = it + 1;
        let relaxed = match opts.outer.cap_rule {
            CapRule::Tighten => (it == 0 && relax_first) || map.interference_free(),
            CapRule::CapOnly => true,
        };
        let caps = if relaxed { vec![qos.p_max_w; devices.len()] } else { dep.solution.power_w.clone() };
        let sweep = place_all(
            &dep.uav_locs,
            devices,
            &dep.solution,
            map,
            env,
            qos.gamma,
            qos.p_max_w,
            &caps,
            &opts.placement,
        );
        let mut target = sweep.uav_locs.clone();
        let reseeded = reseed_idle(&mut target, devices, &dep.solution, &sweep.power_w, env, qos, &opts.placement);
        let mut step = None;
        if reseeded || sweep.accepted.iter().any(|&a| a) {
            let mut t = 1.0;
            for _ in 0..=opts.outer.max_halvings {
                let locs: Vec<Vec3> = dep
                    .uav_locs
                    .iter()
                    .zip(&target)
                    .map(|(a, b)| Vec3::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.h + t * (b.h - a.h)))
                    .collect();
                let p0 = (t == 1.0).then_some(sweep.power_w.as_slice());
                let sol = associate(&locs, devices, map, env, qos, p0);
                if obj - sol.objective_w() >= opts.outer.rel_tol * obj {
                    step = Some((locs, sol));
                    break;
                }
                t *= 0.5;
            }
        }
        match step {
            Some((locs, sol)) => {
                obj = sol.objective_w();
                dep.uav_locs = locs;
                dep.set_solution(sol);
                dep.trace_w.push(obj);
            }
            None => {
                dep.trace_w.push(obj);
                dep.converged = true;
                break;
            }
        }
        assert!(
            dep.trace_w[dep.trace_w.len() - 1] <= dep.trace_w[dep.trace_w.len() - 2],
            "outer loop increased total power"
        );
    }
    dep
}
