//! Air-to-ground geometry, LoS probability and the LoS/NLoS-averaged
//! path loss used for every uplink link in the system.
//!
//! All powers and gains are linear (Watts and ratios). Angles are in
//! degrees because the environment constant `psi` is a degree-scale value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distances below this are clamped before evaluating path loss.
pub const DISTANCE_FLOOR_M: f64 = 1.0;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("degenerate geometry: device and UAV are co-located")]
    CoLocated,
    #[error("device {0} is not associated with any UAV")]
    Unassociated(usize),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
}

/// A point in the local frame. Ground devices sit at `h = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, h }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, h: 0.0 }
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.h - other.h).powi(2))
            .sqrt()
    }

    pub fn horizontal_distance(&self, other: &Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn with_altitude(self, h: f64) -> Self {
        Self { h, ..self }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.h.is_finite()
    }
}

/// Propagation environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Logistic LoS curve offset (degrees scale).
    pub psi: f64,
    /// Logistic LoS curve steepness (1/degree).
    pub beta_env: f64,
    /// Excess path loss of a LoS link (linear, > 1).
    pub eta_los: f64,
    /// Excess path loss of an NLoS link (linear, > `eta_los`).
    pub eta_nlos: f64,
    pub carrier_hz: f64,
    /// Path-loss exponent.
    pub pathloss_exp: f64,
    /// Receiver noise power (W).
    pub noise_w: f64,
    pub lightspeed: f64,
}

impl Environment {
    /// Urban environment at 2 GHz: psi = 11.95, beta = 0.14, 3 dB / 23 dB
    /// excess losses, free-space exponent and -130 dBm noise.
    pub fn urban() -> Self {
        Self {
            psi: 11.95,
            beta_env: 0.14,
            eta_los: db_to_linear(3.0),
            eta_nlos: db_to_linear(23.0),
            carrier_hz: 2.0e9,
            pathloss_exp: 2.0,
            noise_w: dbm_to_watts(-130.0),
            lightspeed: SPEED_OF_LIGHT,
        }
    }

    /// `4 pi f_c / c`.
    pub fn k_o(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.carrier_hz / self.lightspeed
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidEnvironment(m.to_string()));
        if !(self.psi.is_finite() && self.beta_env.is_finite() && self.beta_env > 0.0) {
            return bad("psi must be finite and beta positive");
        }
        if !(self.eta_los > 1.0 && self.eta_nlos > self.eta_los) {
            return bad("require eta_nlos > eta_los > 1");
        }
        if !(self.carrier_hz > 0.0 && self.lightspeed > 0.0) {
            return bad("carrier frequency and light speed must be positive");
        }
        if !(self.pathloss_exp >= 2.0) {
            return bad("path-loss exponent must be >= 2");
        }
        if !(self.noise_w > 0.0) {
            return bad("noise power must be positive");
        }
        Ok(())
    }

    /// LoS/NLoS weighted excess loss `eta_los * p + eta_nlos * (1 - p)`.
    #[inline]
    pub fn excess_loss(&self, p_los: f64) -> f64 {
        self.eta_los * p_los + self.eta_nlos * (1.0 - p_los)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Per-link quantities for one device/UAV pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub elevation_deg: f64,
    pub p_los: f64,
    pub avg_pathloss: f64,
    pub avg_gain: f64,
}

/// Elevation angle of `uav` as seen from `device`, in degrees.
pub fn elevation_angle(device: &Vec3, uav: &Vec3) -> Result<f64, ChannelError> {
    let d = device.distance(uav);
    if d <= f64::EPSILON {
        return Err(ChannelError::CoLocated);
    }
    Ok(elevation_from_parts(uav.h - device.h, device.horizontal_distance(uav)))
}

// atan2 agrees with asin(dh/d) and stays accurate near 90 degrees.
#[inline]
fn elevation_from_parts(dh: f64, horizontal: f64) -> f64 {
    dh.atan2(horizontal).to_degrees().clamp(0.0, 90.0)
}

/// Logistic LoS probability of a link at the given elevation angle.
#[inline]
pub fn los_probability(elevation_deg: f64, env: &Environment) -> f64 {
    1.0 / (1.0 + env.psi * (-env.beta_env * (elevation_deg - env.psi)).exp())
}

/// Average (LoS/NLoS weighted) path loss between a ground device and a UAV.
pub fn avg_path_loss(device: &Vec3, uav: &Vec3, env: &Environment) -> Result<f64, ChannelError> {
    link_budget(device, uav, env).map(|l| l.avg_pathloss)
}

pub fn link_budget(device: &Vec3, uav: &Vec3, env: &Environment) -> Result<LinkBudget, ChannelError> {
    let elevation_deg = elevation_angle(device, uav)?;
    let distance_m = device.distance(uav);
    let p_los = los_probability(elevation_deg, env);
    let avg_pathloss = pathloss_at(distance_m, p_los, env);
    Ok(LinkBudget {
        distance_m,
        elevation_deg,
        p_los,
        avg_pathloss,
        avg_gain: 1.0 / avg_pathloss,
    })
}

/// Path loss without the co-location check, for hot loops where callers
/// have already validated geometry. Co-located points evaluate at the floor.
#[inline]
pub fn avg_path_loss_unchecked(device: &Vec3, uav: &Vec3, env: &Environment) -> f64 {
    let horizontal = device.horizontal_distance(uav);
    let dh = uav.h - device.h;
    let d = (horizontal * horizontal + dh * dh).sqrt();
    let theta = if d > 0.0 { elevation_from_parts(dh, horizontal) } else { 90.0 };
    pathloss_at(d, los_probability(theta, env), env)
}

#[inline]
fn pathloss_at(distance_m: f64, p_los: f64, env: &Environment) -> f64 {
    let d = distance_m.max(DISTANCE_FLOOR_M);
    let kd = env.k_o() * d;
    let spread = if env.pathloss_exp == 2.0 { kd * kd } else { kd.powf(env.pathloss_exp) };
    env.excess_loss(p_los) * spread
}

/// Uplink SINR of device `i` at its serving UAV using average gains for
/// both the desired link and every co-channel interferer.
pub fn sinr(
    i: usize,
    devices: &[Vec3],
    uavs: &[Vec3],
    assoc: &[usize],
    power_w: &[f64],
    interferers: &[usize],
    env: &Environment,
) -> Result<f64, ChannelError> {
    let serving = assoc
        .get(i)
        .and_then(|&j| uavs.get(j))
        .ok_or(ChannelError::Unassociated(i))?;
    let desired = power_w[i] / avg_path_loss(&devices[i], serving, env)?;
    let mut interference = 0.0;
    for &k in interferers {
        interference += power_w[k] / avg_path_loss(&devices[k], serving, env)?;
    }
    Ok(desired / (interference + env.noise_w))
}
