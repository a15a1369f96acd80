//! Exhaustive grid search over UAV positions for tiny instances.
//!
//! Without interference the total power separates over UAVs once the device
//! partition is fixed, so the best grid point is found per device subset and
//! the partitions are enumerated on top. With interference every tuple of
//! grid points is solved by joint association and power control. Both paths
//! then refine on a finer local grid around the coarse winner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{associate, fixed_snapshot, Deployment};
use crate::geo::{avg_path_loss_unchecked, Environment, Vec3};
use crate::power::QosParams;
use crate::spectrum::ChannelMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub altitude_range: (f64, f64),
    /// Spacing of the global grid, metres.
    pub coarse_m: f64,
    /// Spacing of the local refinement grid, metres.
    pub fine_m: f64,
}

impl OracleGrid {
    /// Grid over the bounding box of `devices`.
    pub fn covering(devices: &[Vec3], altitude_range: (f64, f64), coarse_m: f64, fine_m: f64) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for d in devices {
            x0 = x0.min(d.x);
            x1 = x1.max(d.x);
            y0 = y0.min(d.y);
            y1 = y1.max(d.y);
        }
        if devices.is_empty() {
            (x0, x1, y0, y1) = (0.0, 0.0, 0.0, 0.0);
        }
        Self { x_range: (x0, x1), y_range: (y0, y1), altitude_range, coarse_m, fine_m }
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor().max(0.0) as usize + 1;
        (0..n).map(|k| lo + k as f64 * step).collect()
    }

    pub fn coarse_points(&self) -> Vec<Vec3> {
        self.points_in(self.x_range, self.y_range, self.altitude_range, self.coarse_m)
    }

    fn points_in(&self, xr: (f64, f64), yr: (f64, f64), hr: (f64, f64), step: f64) -> Vec<Vec3> {
        let xs = Self::axis(xr.0, xr.1, step);
        let ys = Self::axis(yr.0, yr.1, step);
        let hs = Self::axis(hr.0, hr.1, step);
        let mut out = Vec::with_capacity(xs.len() * ys.len() * hs.len());
        for &h in &hs {
            for &y in &ys {
                for &x in &xs {
                    out.push(Vec3::new(x, y, h));
                }
            }
        }
        out
    }

    /// Fine points within one coarse step of `c`, clipped to the altitudes.
    fn local_points(&self, c: &Vec3) -> Vec<Vec3> {
        let r = self.coarse_m;
        let h0 = (c.h - r).max(self.altitude_range.0);
        let h1 = (c.h + r).min(self.altitude_range.1);
        self.points_in((c.x - r, c.x + r), (c.y - r, c.y + r), (h0, h1), self.fine_m)
    }
}

/// Grid-optimal deployment of `n_uavs` UAVs. Cost grows as
/// `points * 2^L` without interference and `points^K` with it.
pub fn brute_force_oracle(
    devices: &[Vec3],
    n_uavs: usize,
    map: &ChannelMap,
    env: &Environment,
    qos: &QosParams,
    grid: &OracleGrid,
) -> Deployment {
    assert!(n_uavs >= 1, "at least one UAV");
    let points = grid.coarse_points();
    if devices.is_empty() {
        return fixed_snapshot(devices, map, &vec![points[0]; n_uavs], env, qos);
    }
    let locs = if map.interference_free() {
        separable_search(devices, n_uavs, env, qos, grid, &points)
    } else {
        joint_search(devices, n_uavs, map, env, qos, grid, &points)
    };
    fixed_snapshot(devices, map, &locs, env, qos)
}

fn link_cost(d: &Vec3, p: &Vec3, env: &Environment, qos: &QosParams) -> f64 {
    (qos.gamma * env.noise_w * avg_path_loss_unchecked(d, p, env)).min(qos.p_max_w)
}

/// Best point and value for every device subset over `points`.
fn best_per_subset(devices: &[Vec3], env: &Environment, qos: &QosParams, points: &[Vec3]) -> Vec<(f64, usize)> {
    let n = devices.len();
    let masks = 1usize << n;
    points
        .par_chunks(4096)
        .enumerate()
        .map(|(chunk, pts)| {
            let mut best = vec![(f64::INFINITY, 0usize); masks];
            let mut sum = vec![0.0; masks];
            let mut cost = vec![0.0; n];
            for (k, p) in pts.iter().enumerate() {
                for (c, d) in cost.iter_mut().zip(devices) {
                    *c = link_cost(d, p, env, qos);
                }
                for m in 1..masks {
                    let low = m.trailing_zeros() as usize;
                    sum[m] = sum[m & (m - 1)] + cost[low];
                    if sum[m] < best[m].0 {
                        best[m] = (sum[m], chunk * 4096 + k);
                    }
                }
            }
            best
        })
        .reduce_with(|a, b| a.into_iter().zip(b).map(|(x, y)| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x }).collect())
        .expect("grid has points")
}

fn separable_search(
    devices: &[Vec3],
    k: usize,
    env: &Environment,
    qos: &QosParams,
    grid: &OracleGrid,
    points: &[Vec3],
) -> Vec<Vec3> {
    let n = devices.len();
    let coarse = best_per_subset(devices, env, qos, points);
    // refine every subset around its coarse optimum
    let refined: Vec<(f64, Vec3)> = (0..1usize << n)
        .into_par_iter()
        .map(|m| {
            if m == 0 {
                return (0.0, points[0]);
            }
            let centre = points[coarse[m].1];
            let mut best = (coarse[m].0, centre);
            for p in grid.local_points(&centre) {
                let v: f64 = (0..n).filter(|i| m >> i & 1 == 1).map(|i| link_cost(&devices[i], &p, env, qos)).sum();
                if v < best.0 {
                    best = (v, p);
                }
            }
            best
        })
        .collect();

    // enumerate labelings of devices with UAVs
    let mut best_total = f64::INFINITY;
    let mut best_masks = vec![0usize; k];
    let mut label = vec![0usize; n];
    loop {
        let mut masks = vec![0usize; k];
        for (i, &l) in label.iter().enumerate() {
            masks[l] |= 1 << i;
        }
        let total: f64 = masks.iter().map(|&m| refined[m].0).sum();
        if total < best_total {
            best_total = total;
            best_masks = masks;
        }
        // odometer increment
        let mut i = 0;
        while i < n {
            label[i] += 1;
            if label[i] < k {
                break;
            }
            label[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    best_masks.iter().map(|&m| refined[m].1).collect()
}

fn joint_search(
    devices: &[Vec3],
    k: usize,
    map: &ChannelMap,
    env: &Environment,
    qos: &QosParams,
    grid: &OracleGrid,
    points: &[Vec3],
) -> Vec<Vec3> {
    let eval = |locs: &[Vec3]| associate(locs, devices, map, env, qos, None).objective_w();
    let np = points.len();
    let total = np.pow(k as u32);
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; k];
        for o in out.iter_mut() {
            *o = idx % np;
            idx /= np;
        }
        out
    };
    // UAVs are interchangeable: only non-decreasing index tuples
    let (_, best_idx) = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let t = decode(idx);
            if t.windows(2).any(|w| w[0] > w[1]) {
                return None;
            }
            let locs: Vec<Vec3> = t.iter().map(|&i| points[i]).collect();
            Some((eval(&locs), idx))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("grid has points");
    let mut locs: Vec<Vec3> = decode(best_idx).iter().map(|&i| points[i]).collect();
    let mut best = eval(&locs);

    // coordinate-wise local refinement
    for _ in 0..2 {
        for j in 0..k {
            let candidates = grid.local_points(&locs[j]);
            let (v, p) = candidates
                .par_iter()
                .map(|p| {
                    let mut trial = locs.clone();
                    trial[j] = *p;
                    (eval(&trial), *p)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("local grid has points");
            if v < best {
                best = v;
                locs[j] = p;
            }
        }
    }
    locs
}
