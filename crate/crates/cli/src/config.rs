//! Scenario configuration file.
//!
//! TOML with units in every key name. Unknown keys are rejected, decibel
//! values are converted once when the scenario is built, and relative file
//! paths resolve against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aerial_iot::activation::{channel_filling_targets, equal_targets, update_times, ActivationModel, UpdateSchedule};
use aerial_iot::geo::{db_to_linear, dbm_to_watts};
use aerial_iot::mobility::AirframeParams;
use aerial_iot::orchestrator::{uniform_devices, CapRule, OuterOptions, Scenario};
use aerial_iot::placement::{PlacementOptions, DEFAULT_FIT_SAMPLES};
use aerial_iot::power::QosParams;
use aerial_iot::{Environment, Vec3};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_area")]
    pub area_m: (f64, f64),
    /// Uniformly placed devices; defaults to 100 unless `devices_file` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_devices: Option<usize>,
    /// CSV with `x_m,y_m` columns, one device per row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devices_file: Option<PathBuf>,
    #[serde(default = "default_uavs")]
    pub n_uavs: usize,
    #[serde(default = "default_channels")]
    pub n_channels: usize,
    #[serde(default = "default_p_max")]
    pub p_max_w: f64,
    #[serde(default = "default_gamma")]
    pub gamma_db: f64,
    #[serde(default = "default_noise")]
    pub noise_dbm: f64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    /// Equal expected activations per interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_updates: Option<usize>,
    /// Expected activations per interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    /// Explicit update instants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_times_s: Option<Vec<f64>>,
    #[serde(default = "default_e_max")]
    pub e_max_j: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub environment: EnvConfig,
    #[serde(default)]
    pub activation: ActivationConfig,
    #[serde(default)]
    pub airframe: AirframeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_area() -> (f64, f64) {
    (1000.0, 1000.0)
}
fn default_uavs() -> usize {
    5
}
fn default_channels() -> usize {
    20
}
fn default_p_max() -> f64 {
    0.2
}
fn default_gamma() -> f64 {
    5.0
}
fn default_noise() -> f64 {
    -130.0
}
fn default_horizon() -> f64 {
    3600.0
}
fn default_e_max() -> f64 {
    500e3
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("every key has a default")
    }
}

/// Propagation environment. Only the urban constants ship as a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Urban,
    Custom {
        psi: f64,
        beta: f64,
        eta_los_db: f64,
        eta_nlos_db: f64,
        #[serde(default = "default_carrier")]
        carrier_hz: f64,
        #[serde(default = "default_exponent")]
        pathloss_exp: f64,
    },
}

fn default_carrier() -> f64 {
    2.0e9
}
fn default_exponent() -> f64 {
    2.0
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::Urban
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationConfig {
    Beta { kappa: f64, omega: f64 },
    /// One period in seconds per line, `#` starts a comment.
    Periodic { periods_file: PathBuf },
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self::Beta { kappa: 3.0, omega: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirframeConfig {
    pub speed_mps: f64,
    pub air_density_kg_m3: f64,
    /// Placeholder value, not part of the reference airframe.
    pub drag_coeff: f64,
    /// Placeholder value, not part of the reference airframe.
    pub ref_area_m2: f64,
    pub n_blades: f64,
    pub blade_chord_m: f64,
    pub rotor_rad_s: f64,
    pub rotor_radius_m: f64,
    pub weight_n: f64,
}

impl Default for AirframeConfig {
    fn default() -> Self {
        let p = AirframeParams::default();
        Self {
            speed_mps: p.speed_mps,
            air_density_kg_m3: p.air_density,
            drag_coeff: p.drag_coeff,
            ref_area_m2: p.ref_area_m2,
            n_blades: p.n_blades,
            blade_chord_m: p.blade_chord_m,
            rotor_rad_s: p.rotor_rad_s,
            rotor_radius_m: p.rotor_radius_m,
            weight_n: p.weight_n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub altitude_min_m: f64,
    pub altitude_max_m: f64,
    pub altitude_grid: usize,
    pub max_outer_iters: usize,
    pub cap_rule: CapRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = PlacementOptions::default();
        let o = OuterOptions::default();
        Self {
            altitude_min_m: p.altitude_bounds.0,
            altitude_max_m: p.altitude_bounds.1,
            altitude_grid: p.altitude_grid,
            max_outer_iters: o.max_iters,
            cap_rule: o.cap_rule,
        }
    }
}

/// Config with the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = ScenarioConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}

impl LoadedConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn devices(&self, seed: u64) -> Result<Vec<Vec3>, CliError> {
        let c = &self.config;
        match &c.devices_file {
            Some(file) => {
                let path = self.resolve(file);
                let devices = read_devices(&path)?;
                if let Some(n) = c.n_devices {
                    if n != devices.len() {
                        return Err(CliError::Config(format!(
                            "n_devices = {n} but {} lists {} devices",
                            path.display(),
                            devices.len()
                        )));
                    }
                }
                Ok(devices)
            }
            None => Ok(uniform_devices(c.n_devices.unwrap_or(100), c.area_m, seed)),
        }
    }

    /// Scenario for run seed `seed`; uniform device layouts are redrawn per seed.
    pub fn scenario(&self, seed: u64) -> Result<Scenario, CliError> {
        let c = &self.config;
        let devices = self.devices(seed)?;
        let mut env = match &c.environment {
            EnvConfig::Urban => Environment::urban(),
            EnvConfig::Custom { psi, beta, eta_los_db, eta_nlos_db, carrier_hz, pathloss_exp } => Environment {
                psi: *psi,
                beta_env: *beta,
                eta_los: db_to_linear(*eta_los_db),
                eta_nlos: db_to_linear(*eta_nlos_db),
                carrier_hz: *carrier_hz,
                pathloss_exp: *pathloss_exp,
                ..Environment::urban()
            },
        };
        env.noise_w = dbm_to_watts(c.noise_dbm);
        let activation = match &c.activation {
            ActivationConfig::Beta { kappa, omega } => ActivationModel::beta(*kappa, *omega, c.horizon_s),
            ActivationConfig::Periodic { periods_file } => {
                let path = self.resolve(periods_file);
                let periods = read_periods(&path)?;
                if periods.len() != devices.len() {
                    return Err(CliError::Config(format!(
                        "{} lists {} periods for {} devices",
                        path.display(),
                        periods.len(),
                        devices.len()
                    )));
                }
                ActivationModel::periodic(periods, c.horizon_s)
            }
        };
        let a = &c.airframe;
        let s = &c.solver;
        let scenario = Scenario {
            area_m: c.area_m,
            devices,
            n_uavs: c.n_uavs,
            n_channels: c.n_channels,
            env,
            qos: QosParams::new(db_to_linear(c.gamma_db), c.p_max_w),
            activation,
            airframe: AirframeParams {
                speed_mps: a.speed_mps,
                air_density: a.air_density_kg_m3,
                drag_coeff: a.drag_coeff,
                ref_area_m2: a.ref_area_m2,
                n_blades: a.n_blades,
                blade_chord_m: a.blade_chord_m,
                rotor_rad_s: a.rotor_rad_s,
                rotor_radius_m: a.rotor_radius_m,
                weight_n: a.weight_n,
            },
            e_max_j: c.e_max_j,
            placement: PlacementOptions {
                altitude_bounds: (s.altitude_min_m, s.altitude_max_m),
                altitude_grid: s.altitude_grid,
                fit_samples: DEFAULT_FIT_SAMPLES,
                ..PlacementOptions::default()
            },
            outer: OuterOptions { max_iters: s.max_outer_iters, cap_rule: s.cap_rule, ..OuterOptions::default() },
        };
        scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(scenario)
    }

    /// Update instants: explicit times, expected counts, `n_updates` equal
    /// counts, or one channel's worth of devices per interval by default.
    pub fn schedule(&self, scenario: &Scenario) -> Result<UpdateSchedule, CliError> {
        let c = &self.config;
        let given = [c.update_times_s.is_some(), c.targets.is_some(), c.n_updates.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(CliError::Config("set at most one of update_times_s, targets and n_updates".into()));
        }
        let l = scenario.devices.len();
        let beta = matches!(c.activation, ActivationConfig::Beta { .. });
        let from_targets = |targets: &[f64]| {
            update_times(targets, l, &scenario.activation).map_err(|e| CliError::Config(e.to_string()))
        };
        if let Some(times) = &c.update_times_s {
            return UpdateSchedule::from_times(times.clone(), c.horizon_s).map_err(|e| CliError::Config(e.to_string()));
        }
        if let Some(targets) = &c.targets {
            return from_targets(targets);
        }
        if let Some(n) = c.n_updates {
            if n == 0 {
                return Err(CliError::Config("n_updates must be positive".into()));
            }
            if beta && l > 0 {
                return from_targets(&equal_targets(l, n));
            }
            let times = (1..=n).map(|k| c.horizon_s * k as f64 / n as f64).collect();
            return UpdateSchedule::from_times(times, c.horizon_s).map_err(|e| CliError::Config(e.to_string()));
        }
        if !beta {
            return Err(CliError::Config("periodic activation needs update_times_s or n_updates".into()));
        }
        if l == 0 {
            return UpdateSchedule::from_times(vec![c.horizon_s], c.horizon_s).map_err(|e| CliError::Config(e.to_string()));
        }
        from_targets(&channel_filling_targets(l, scenario.n_channels))
    }
}

fn read_devices(path: &Path) -> Result<Vec<Vec3>, CliError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        x_m: f64,
        y_m: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize::<Row>()
        .map(|r| r.map(|r| Vec3::ground(r.x_m, r.y_m)).map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

fn read_periods(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(v);
    }
    Ok(out)
}
