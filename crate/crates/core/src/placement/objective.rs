//! Per-UAV placement objective: transmit power each associated device needs
//! at a candidate UAV position, with interferer powers held fixed.

use crate::geo::{los_probability, Environment, Vec3, DISTANCE_FLOOR_M};

/// Average path loss and the gradient of its logarithm with respect to the
/// UAV position `(x, y, h)`.
pub fn log_pathloss_grad(device: &Vec3, uav: &Vec3, env: &Environment) -> (f64, [f64; 3]) {
    let dx = uav.x - device.x;
    let dy = uav.y - device.y;
    let dh = uav.h - device.h;
    let r2 = dx * dx + dy * dy;
    let r = r2.sqrt();
    let d2 = r2 + dh * dh;
    let d = d2.sqrt();

    let theta_deg = if d > 0.0 { dh.atan2(r).to_degrees().clamp(0.0, 90.0) } else { 90.0 };
    let p = los_probability(theta_deg, env);
    let excess = env.excess_loss(p);
    let d_eff = d.max(DISTANCE_FLOOR_M);
    let kd = env.k_o() * d_eff;
    let loss = excess * if env.pathloss_exp == 2.0 { kd * kd } else { kd.powf(env.pathloss_exp) };

    let mut grad = [0.0; 3];
    // distance term, frozen inside the floor
    if d > DISTANCE_FLOOR_M {
        let s = env.pathloss_exp / d2;
        grad[0] += s * dx;
        grad[1] += s * dy;
        grad[2] += s * dh;
    }
    // elevation term through the LoS probability
    if d > 0.0 && theta_deg > 0.0 && theta_deg < 90.0 {
        let dp_dtheta = env.beta_env * p * (1.0 - p) * (180.0 / std::f64::consts::PI);
        let w = (env.eta_los - env.eta_nlos) * dp_dtheta / excess;
        if r > 0.0 {
            let t = -dh / (r * d2);
            grad[0] += w * t * dx;
            grad[1] += w * t * dy;
        }
        grad[2] += w * r / d2;
    }
    (loss, grad)
}

/// Devices served by one UAV with their co-channel interferers.
#[derive(Debug, Clone)]
pub struct UavProblem {
    pub members: Vec<Vec3>,
    /// Per member: `(position, transmit power)` of each co-channel device.
    pub interferers: Vec<Vec<(Vec3, f64)>>,
    pub env: Environment,
    pub gamma: f64,
}

impl UavProblem {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Power member `i` needs to reach the SINR target at UAV position `v`.
    pub fn power(&self, i: usize, v: &Vec3) -> f64 {
        self.power_and_grad(i, v).0
    }

    pub fn power_and_grad(&self, i: usize, v: &Vec3) -> (f64, [f64; 3]) {
        let (loss_i, g_i) = log_pathloss_grad(&self.members[i], v, &self.env);
        let mut floor = self.env.noise_w;
        let mut weighted = [0.0; 3];
        for (pos, pk) in &self.interferers[i] {
            let (loss_k, g_k) = log_pathloss_grad(pos, v, &self.env);
            let term = pk / loss_k;
            floor += term;
            for a in 0..3 {
                weighted[a] += term * g_k[a];
            }
        }
        let f = self.gamma * loss_i * floor;
        let mut grad = [0.0; 3];
        for a in 0..3 {
            grad[a] = self.gamma * loss_i * (floor * g_i[a] - weighted[a]);
        }
        (f, grad)
    }

    pub fn powers(&self, v: &Vec3) -> Vec<f64> {
        (0..self.len()).map(|i| self.power(i, v)).collect()
    }

    pub fn total(&self, v: &Vec3) -> f64 {
        (0..self.len()).map(|i| self.power(i, v)).sum()
    }
}
