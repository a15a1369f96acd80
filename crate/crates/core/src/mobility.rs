//! Rotary-wing flight energy and budget-constrained relocation planning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{hungarian, AssignError, CostMatrix, INFEASIBLE};
use crate::geo::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("descent at {speed_mps} m/s is below the windmill-state threshold {threshold_mps} m/s")]
    OutOfModel { speed_mps: f64, threshold_mps: f64 },
    #[error("invalid airframe: {0}")]
    InvalidAirframe(String),
    #[error("{from} origins but {to} destinations")]
    SizeMismatch { from: usize, to: usize },
    #[error("no relocation fits the remaining budgets; stranded UAVs {binding:?}")]
    Infeasible { binding: Vec<usize>, partial: Box<RelocationPlan> },
    #[error(transparent)]
    Assign(#[from] AssignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirframeParams {
    /// Cruise speed along every leg, m/s.
    pub speed_mps: f64,
    /// kg/m^3
    pub air_density: f64,
    pub drag_coeff: f64,
    pub ref_area_m2: f64,
    pub n_blades: f64,
    pub blade_chord_m: f64,
    /// Rotor angular velocity, rad/s.
    pub rotor_rad_s: f64,
    /// Rotor disk radius, m.
    pub rotor_radius_m: f64,
    pub weight_n: f64,
}

impl Default for AirframeParams {
    /// Quadrotor from the reference scenario. Drag coefficient and frontal
    /// area are not part of that scenario and are placeholder values.
    fn default() -> Self {
        Self {
            speed_mps: 10.0,
            air_density: 1.225,
            drag_coeff: 0.05,
            ref_area_m2: 0.1,
            n_blades: 4.0,
            blade_chord_m: 0.1,
            rotor_rad_s: 20.0,
            rotor_radius_m: 0.5,
            weight_n: 50.0,
        }
    }
}

impl AirframeParams {
    pub fn tip_speed(&self) -> f64 {
        self.rotor_rad_s * self.rotor_radius_m
    }

    /// `2W / (rho pi R^2)`, the squared hover induced-velocity scale.
    fn disk_loading_term(&self) -> f64 {
        2.0 * self.weight_n / (self.air_density * std::f64::consts::PI * self.rotor_radius_m.powi(2))
    }

    /// Smallest descent speed covered by the windmill-state formula.
    pub fn windmill_threshold(&self) -> f64 {
        self.disk_loading_term().sqrt()
    }

    pub fn validate(&self) -> Result<(), MobilityError> {
        let fields = [
            ("speed_mps", self.speed_mps),
            ("air_density", self.air_density),
            ("drag_coeff", self.drag_coeff),
            ("ref_area_m2", self.ref_area_m2),
            ("n_blades", self.n_blades),
            ("blade_chord_m", self.blade_chord_m),
            ("rotor_rad_s", self.rotor_rad_s),
            ("rotor_radius_m", self.rotor_radius_m),
            ("weight_n", self.weight_n),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(MobilityError::InvalidAirframe(format!("{name} must be positive, got {v}")));
        }
        if self.tip_speed() < self.speed_mps {
            return Err(MobilityError::InvalidAirframe(format!(
                "rotor tip speed {} m/s below cruise speed {} m/s",
                self.tip_speed(),
                self.speed_mps
            )));
        }
        Ok(())
    }
}

/// Parasitic power (fuselage drag plus blade profile) at horizontal speed `v_h`.
pub fn parasitic_power(v_h: f64, p: &AirframeParams) -> f64 {
    let fuselage = 0.5 * p.air_density * p.drag_coeff * p.ref_area_m2 * v_h.powi(3);
    let mu = v_h / p.tip_speed();
    let profile = std::f64::consts::FRAC_PI_4
        * p.n_blades
        * p.blade_chord_m
        * p.air_density
        * p.drag_coeff
        * p.rotor_rad_s.powi(3)
        * p.rotor_radius_m.powi(4)
        * (1.0 + 3.0 * mu * mu);
    fuselage + profile
}

fn inflow_residual(lambda: f64, v_h: f64, p: &AirframeParams) -> f64 {
    let omega = p.rotor_rad_s;
    let r = p.rotor_radius_m;
    let mu = v_h / (omega * r);
    2.0 * p.air_density * std::f64::consts::PI * omega * omega * r.powi(4) * lambda * (mu * mu + lambda * lambda).sqrt()
        - p.weight_n
}

/// Positive root of `2 rho pi w^2 R^4 lambda sqrt(v_h^2/(w R)^2 + lambda^2) = W`.
pub fn induced_inflow(v_h: f64, p: &AirframeParams) -> f64 {
    if p.weight_n <= 0.0 {
        return 0.0;
    }
    // the hover root bounds every forward-flight root from above
    let hover = (p.weight_n
        / (2.0 * p.air_density * std::f64::consts::PI * p.rotor_rad_s.powi(2) * p.rotor_radius_m.powi(4)))
    .sqrt();
    if v_h == 0.0 {
        return hover;
    }
    let (mut lo, mut hi) = (0.0f64, hover);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inflow_residual(mid, v_h, p) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if inflow_residual(lo, v_h, p).abs() <= inflow_residual(hi, v_h, p).abs() {
        lo
    } else {
        hi
    }
}

/// Induced power `w R W lambda(v_h)`.
pub fn induced_power(v_h: f64, p: &AirframeParams) -> f64 {
    p.tip_speed() * p.weight_n * induced_inflow(v_h, p)
}

/// Horizontal-flight power: parasitic plus induced.
pub fn horizontal_power(v_h: f64, p: &AirframeParams) -> f64 {
    parasitic_power(v_h, p) + induced_power(v_h, p)
}

fn climb_power(v: f64, p: &AirframeParams) -> f64 {
    let w = p.weight_n;
    0.5 * w * v + 0.5 * w * (v * v + p.disk_loading_term()).sqrt()
}

/// Vertical power at signed vertical speed `v_v` (positive climbs).
///
/// Descents use the windmill-state branch, valid only from the threshold
/// speed `sqrt(2W / (rho pi R^2))` upward.
pub fn vertical_power(v_v: f64, p: &AirframeParams) -> Result<f64, MobilityError> {
    if v_v >= 0.0 {
        return Ok(climb_power(v_v, p));
    }
    let m = -v_v;
    let radicand = m * m - p.disk_loading_term();
    if radicand < 0.0 {
        let threshold_mps = p.windmill_threshold();
        // exactly at the threshold the radicand may round negative
        if (m - threshold_mps).abs() <= 4.0 * f64::EPSILON * threshold_mps {
            return Ok(0.5 * p.weight_n * m);
        }
        return Err(MobilityError::OutOfModel { speed_mps: m, threshold_mps });
    }
    Ok(0.5 * p.weight_n * m - 0.5 * p.weight_n * radicand.sqrt())
}

/// Energy and pricing flag of one leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegCost {
    pub energy_j: f64,
    /// Slow descent priced with the climbing formula.
    pub fallback: bool,
}

fn leg_parts(from: &Vec3, to: &Vec3, p: &AirframeParams) -> Option<(f64, f64, f64)> {
    let d = from.distance(to);
    if d == 0.0 {
        return None;
    }
    let phi = ((to.h - from.h) / d).clamp(-1.0, 1.0).asin();
    Some((d, p.speed_mps * phi.sin(), p.speed_mps * phi.cos()))
}

/// `E = (D / v)(P_V + P_H)` for a straight leg at cruise speed.
pub fn leg_energy(from: &Vec3, to: &Vec3, p: &AirframeParams) -> Result<f64, MobilityError> {
    let Some((d, v_v, v_h)) = leg_parts(from, to, p) else {
        return Ok(0.0);
    };
    Ok(d / p.speed_mps * (vertical_power(v_v, p)? + horizontal_power(v_h, p)))
}

/// Like [`leg_energy`], but descents below the windmill threshold are priced
/// with the climbing formula at the same vertical speed and flagged.
pub fn leg_cost(from: &Vec3, to: &Vec3, p: &AirframeParams) -> LegCost {
    let Some((d, v_v, v_h)) = leg_parts(from, to, p) else {
        return LegCost { energy_j: 0.0, fallback: false };
    };
    let (pv, fallback) = match vertical_power(v_v, p) {
        Ok(pv) => (pv, false),
        Err(_) => (climb_power(v_v.abs(), p), true),
    };
    LegCost { energy_j: d / p.speed_mps * (pv + horizontal_power(v_h, p)), fallback }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelocationPlan {
    /// Destination index of each UAV.
    pub assignment: Vec<usize>,
    pub leg_energy_j: Vec<f64>,
    /// Budget left after the move.
    pub remaining_j: Vec<f64>,
    pub fallback_legs: Vec<bool>,
    /// UAVs that could not afford any admissible destination and stayed put.
    pub stranded: Vec<usize>,
    /// Position of each UAV after the move.
    pub positions: Vec<Vec3>,
}

impl RelocationPlan {
    pub fn total_energy_j(&self) -> f64 {
        self.leg_energy_j.iter().sum()
    }
}

/// Minimum-energy matching of UAVs at `from` onto the stops `to`, forbidding
/// legs that exceed the mover's remaining budget.
pub fn plan_relocation(
    from: &[Vec3],
    to: &[Vec3],
    remaining_j: &[f64],
    p: &AirframeParams,
) -> Result<RelocationPlan, MobilityError> {
    if from.len() != to.len() || remaining_j.len() != from.len() {
        return Err(MobilityError::SizeMismatch { from: from.len(), to: to.len() });
    }
    let n = from.len();
    let legs: Vec<LegCost> = from.iter().flat_map(|a| to.iter().map(move |b| leg_cost(a, b, p))).collect();
    let costs = CostMatrix::from_fn(n, n, |k, l| {
        let e = legs[k * n + l].energy_j;
        if e <= remaining_j[k] {
            e
        } else {
            INFEASIBLE
        }
    })?;
    let (assignment, binding) = match hungarian(&costs) {
        Ok(m) => (m.row_to_col, Vec::new()),
        Err(AssignError::Infeasible { rows, assignment }) => (assignment, rows),
        Err(e) => return Err(e.into()),
    };

    let mut plan = RelocationPlan {
        assignment,
        leg_energy_j: vec![0.0; n],
        remaining_j: remaining_j.to_vec(),
        fallback_legs: vec![false; n],
        stranded: binding.clone(),
        positions: from.to_vec(),
    };
    for k in 0..n {
        if binding.contains(&k) {
            continue;
        }
        let leg = legs[k * n + plan.assignment[k]];
        plan.leg_energy_j[k] = leg.energy_j;
        plan.remaining_j[k] = remaining_j[k] - leg.energy_j;
        plan.fallback_legs[k] = leg.fallback;
        plan.positions[k] = to[plan.assignment[k]];
    }
    if binding.is_empty() {
        Ok(plan)
    } else {
        Err(MobilityError::Infeasible { binding, partial: Box::new(plan) })
    }
}
