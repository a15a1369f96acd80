//! Device activation processes and update-time scheduling.
//!
//! Two activation models are supported. Under `BetaRandom` each device wakes
//! once in `[0, T]` at a beta-distributed instant; update times are then
//! placed so that on average `a_n` devices wake between consecutive updates.
//! Under `Periodic` device `i` wakes at `tau_i, 2 tau_i, ...` and the number
//! of devices to serve at each update is known exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{inv_reg_inc_beta, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivationError {
    #[error("cumulative target fraction {0} exceeds 1")]
    InfeasibleSchedule(f64),
    #[error("update targets must be positive (target {index} = {value})")]
    NonPositiveTarget { index: usize, value: f64 },
    #[error("invalid activation model: {0}")]
    InvalidModel(String),
    #[error("update times must be strictly increasing and lie in (0, T]")]
    BadSchedule,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActivationKind {
    /// One activation per device at `T * Beta(kappa, omega)`.
    BetaRandom { kappa: f64, omega: f64 },
    /// Per-device activation periods in seconds.
    Periodic { periods_s: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationModel {
    pub kind: ActivationKind,
    pub horizon_s: f64,
}

impl ActivationModel {
    pub fn beta(kappa: f64, omega: f64, horizon_s: f64) -> Self {
        Self { kind: ActivationKind::BetaRandom { kappa, omega }, horizon_s }
    }

    pub fn periodic(periods_s: Vec<f64>, horizon_s: f64) -> Self {
        Self { kind: ActivationKind::Periodic { periods_s }, horizon_s }
    }

    pub fn validate(&self, n_devices: usize) -> Result<(), ActivationError> {
        let bad = |m: String| Err(ActivationError::InvalidModel(m));
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon_s));
        }
        match &self.kind {
            ActivationKind::BetaRandom { kappa, omega } => {
                if !(*kappa > 0.0 && *omega > 0.0) {
                    return bad(format!("beta shapes must be positive, got ({kappa}, {omega})"));
                }
            }
            ActivationKind::Periodic { periods_s } => {
                if periods_s.len() != n_devices {
                    return bad(format!(
                        "{} periods given for {} devices",
                        periods_s.len(),
                        n_devices
                    ));
                }
                if let Some(p) = periods_s.iter().find(|&&p| !(p > 0.0 && p <= self.horizon_s)) {
                    return bad(format!("period {p} outside (0, T]"));
                }
            }
        }
        Ok(())
    }
}

/// Update instants `t_1 < ... < t_N` and the per-update target counts that
/// produced them (expected counts `a_n` or exact counts `b_n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub times_s: Vec<f64>,
    pub targets: Vec<f64>,
}

impl UpdateSchedule {
    /// Schedule from explicit times; targets are left as zeros.
    pub fn from_times(times_s: Vec<f64>, horizon_s: f64) -> Result<Self, ActivationError> {
        let increasing = times_s.windows(2).all(|w| w[0] < w[1]);
        let in_range = times_s.iter().all(|&t| t > 0.0 && t <= horizon_s);
        if times_s.is_empty() || !increasing || !in_range {
            return Err(ActivationError::BadSchedule);
        }
        let targets = vec![0.0; times_s.len()];
        Ok(Self { times_s, targets })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// `[t_{n-1}, t_n)` with `t_0 = 0`.
    pub fn interval(&self, n: usize) -> (f64, f64) {
        let start = if n == 0 { 0.0 } else { self.times_s[n - 1] };
        (start, self.times_s[n])
    }
}

/// `N` equal targets `L / N`, which place the last update at `T`.
pub fn equal_targets(n_devices: usize, n_updates: usize) -> Vec<f64> {
    vec![n_devices as f64 / n_updates as f64; n_updates]
}

/// Targets equal to the channel count `R`, with the remainder in a final
/// update so the schedule spans the whole horizon.
pub fn channel_filling_targets(n_devices: usize, n_channels: usize) -> Vec<f64> {
    let full = n_devices / n_channels;
    let mut targets = vec![n_channels as f64; full];
    let rest = n_devices - full * n_channels;
    if rest > 0 {
        targets.push(rest as f64);
    }
    targets
}

/// Update times such that, on average, `targets[n]` of the `n_devices`
/// beta-activated devices wake in `[t_{n-1}, t_n)`:
/// `t_n = T * I^{-1}(a_n / L + I_{t_{n-1}/T})`.
pub fn update_times(
    targets: &[f64],
    n_devices: usize,
    model: &ActivationModel,
) -> Result<UpdateSchedule, ActivationError> {
    let ActivationKind::BetaRandom { kappa, omega } = model.kind else {
        return Err(ActivationError::InvalidModel(
            "update times from average targets need the beta activation model".into(),
        ));
    };
    model.validate(n_devices)?;
    if n_devices == 0 || targets.is_empty() {
        return Err(ActivationError::InvalidModel("need at least one device and one target".into()));
    }
    let big_l = n_devices as f64;
    let total: f64 = targets.iter().sum::<f64>() / big_l;
    if total > 1.0 + 1e-12 {
        return Err(ActivationError::InfeasibleSchedule(total));
    }
    let t_end = model.horizon_s;
    let mut times = Vec::with_capacity(targets.len());
    let mut prev = 0.0f64;
    // I_{t_{n-1}/T} equals the cumulative fraction of earlier targets, so the
    // recursion is evaluated on the exact running sum instead of re-applying
    // I to a rounded t_{n-1}; near x = 1 the CDF is flat and that round trip
    // would amplify rounding into visible time errors.
    let mut cumulative = 0.0f64;
    for (index, &a) in targets.iter().enumerate() {
        if !(a > 0.0) {
            return Err(ActivationError::NonPositiveTarget { index, value: a });
        }
        cumulative += a;
        let mut frac = cumulative / big_l;
        if frac > 1.0 - 1e-12 {
            frac = 1.0;
        }
        let t = t_end * inv_reg_inc_beta(frac, kappa, omega)?;
        if t <= prev {
            return Err(ActivationError::BadSchedule);
        }
        times.push(t);
        prev = t;
    }
    Ok(UpdateSchedule { times_s: times, targets: targets.to_vec() })
}

/// Activations of a periodic device strictly before `t`.
fn activations_before(t: f64, period: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (t.next_down() / period).floor()
    }
}

/// Exact number of periodic devices that wake in `[t_{n-1}, t_n)` for each
/// update, counted once per device.
pub fn exact_periodic_counts(times_s: &[f64], periods_s: &[f64]) -> Vec<usize> {
    let mut prev = 0.0;
    times_s
        .iter()
        .map(|&t| {
            let count = periods_s
                .iter()
                .filter(|&&tau| activations_before(t, tau) > activations_before(prev, tau))
                .count();
            prev = t;
            count
        })
        .collect()
}

/// Draw the active device set for every update interval.
pub fn sample_active_sets(
    model: &ActivationModel,
    schedule: &UpdateSchedule,
    n_devices: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, ActivationError> {
    model.validate(n_devices)?;
    let mut sets = vec![Vec::new(); schedule.len()];
    match &model.kind {
        ActivationKind::BetaRandom { kappa, omega } => {
            let dist = Beta::new(*kappa, *omega)
                .map_err(|e| ActivationError::InvalidModel(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for device in 0..n_devices {
                let t = model.horizon_s * dist.sample(&mut rng);
                // first update strictly after the activation instant
                let n = schedule.times_s.partition_point(|&tn| tn <= t);
                if n < sets.len() {
                    sets[n].push(device);
                }
            }
        }
        ActivationKind::Periodic { periods_s } => {
            for n in 0..schedule.len() {
                let (start, end) = schedule.interval(n);
                sets[n] = (0..n_devices)
                    .filter(|&i| {
                        activations_before(end, periods_s[i]) > activations_before(start, periods_s[i])
                    })
                    .collect();
            }
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_shape_gives_linear_times() {
        let model = ActivationModel::beta(1.0, 1.0, 100.0);
        let targets = [10.0, 30.0, 5.0, 55.0];
        let s = update_times(&targets, 100, &model).unwrap();
        let mut t = 0.0;
        for (tn, a) in s.times_s.iter().zip(targets) {
            t += 100.0 * a / 100.0;
            assert!((tn - t).abs() < 1e-9, "{tn} vs {t}");
        }
    }

    #[test]
    fn equal_targets_reach_horizon() {
        let model = ActivationModel::beta(3.0, 4.0, 1.0);
        let s = update_times(&equal_targets(500, 10), 500, &model).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s.times_s[9] - 1.0).abs() < 1e-12);
        assert!(s.times_s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn first_update_matches_inverse() {
        let model = ActivationModel::beta(3.0, 4.0, 50.0);
        let s = update_times(&[100.0], 500, &model).unwrap();
        assert!((s.times_s[0] - 50.0 * 0.268_649_154_220_667_86).abs() < 1e-10);
    }

    #[test]
    fn running_sum_agrees_with_recursive_form() {
        let model = ActivationModel::beta(3.0, 4.0, 20.0);
        let targets = [60.0, 80.0, 100.0, 40.0];
        let s = update_times(&targets, 500, &model).unwrap();
        let mut prev = 0.0;
        for (tn, a) in s.times_s.iter().zip(targets) {
            let base = crate::special::reg_inc_beta(prev / 20.0, 3.0, 4.0).unwrap();
            let t = 20.0 * inv_reg_inc_beta(a / 500.0 + base, 3.0, 4.0).unwrap();
            assert!((tn - t).abs() < 1e-9, "{tn} vs {t}");
            prev = *tn;
        }
    }

    #[test]
    fn over_budget_targets_are_rejected() {
        let model = ActivationModel::beta(3.0, 4.0, 1.0);
        let err = update_times(&[300.0, 300.0], 500, &model).unwrap_err();
        assert!(matches!(err, ActivationError::InfeasibleSchedule(f) if (f - 1.2).abs() < 1e-12));
        assert!(matches!(
            update_times(&[10.0, 0.0], 500, &model),
            Err(ActivationError::NonPositiveTarget { index: 1, .. })
        ));
        let periodic = ActivationModel::periodic(vec![1.0], 1.0);
        assert!(update_times(&[1.0], 1, &periodic).is_err());
    }

    #[test]
    fn channel_filling_targets_cover_all_devices() {
        assert_eq!(channel_filling_targets(50, 20), vec![20.0, 20.0, 10.0]);
        assert_eq!(channel_filling_targets(40, 20), vec![20.0, 20.0]);
    }

    #[test]
    fn periodic_single_device_example() {
        // activations at 3, 6, 9 bucketed into [0, 4) and [4, 8)
        assert_eq!(exact_periodic_counts(&[4.0, 8.0], &[3.0]), vec![1, 1]);
    }

    #[test]
    fn periods_beyond_horizon_never_activate() {
        assert_eq!(exact_periodic_counts(&[2.0, 5.0, 10.0], &[11.0, 12.5, 40.0]), vec![0, 0, 0]);
    }

    #[test]
    fn half_period_counts_in_first_update() {
        assert_eq!(exact_periodic_counts(&[6.0], &[3.0]), vec![1]);
        // activation exactly at the update instant belongs to the next interval
        assert_eq!(exact_periodic_counts(&[3.0, 6.0], &[3.0]), vec![0, 1]);
    }

    #[test]
    fn sampling_is_deterministic_and_partitions() {
        let model = ActivationModel::beta(3.0, 4.0, 1.0);
        let s = update_times(&[40.0, 40.0, 40.0], 200, &model).unwrap();
        let a = sample_active_sets(&model, &s, 200, 42).unwrap();
        let b = sample_active_sets(&model, &s, 200, 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.iter().flatten().copied().collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n, "buckets overlap");

        // union equals devices that woke before t_N, recomputed from the raw draws
        let dist = Beta::new(3.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let early: Vec<usize> =
            (0..200).filter(|_| dist.sample(&mut rng) < s.times_s[2]).collect();
        assert_eq!(all, early);
    }

    #[test]
    fn periodic_sampling_agrees_with_counts() {
        let periods: Vec<f64> = (0..30).map(|i| 1.5 + 0.3 * i as f64).collect();
        let model = ActivationModel::periodic(periods.clone(), 12.0);
        let s = UpdateSchedule::from_times(vec![2.0, 4.5, 7.0, 12.0], 12.0).unwrap();
        let sets = sample_active_sets(&model, &s, 30, 0).unwrap();
        let counts = exact_periodic_counts(&s.times_s, &periods);
        assert_eq!(sets.iter().map(Vec::len).collect::<Vec<_>>(), counts);
    }

    #[test]
    fn model_validation() {
        assert!(ActivationModel::beta(0.0, 1.0, 1.0).validate(3).is_err());
        assert!(ActivationModel::periodic(vec![1.0, 2.0], 1.5).validate(2).is_err());
        assert!(ActivationModel::periodic(vec![1.0], 1.5).validate(2).is_err());
        assert!(ActivationModel::periodic(vec![1.0, 1.5], 1.5).validate(2).is_ok());
    }
}
