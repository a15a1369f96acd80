//! Orthogonal channel assignment by size-constrained k-means.
//!
//! Active devices are grouped into `ceil(L / R)` spatial clusters of at most
//! `R` members; members of a cluster receive distinct channels from a single
//! global pool, so co-channel devices always sit in different clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::Vec3;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITERS: usize = 100;

/// Channel and cluster of every active device (indices local to the active
/// list handed to [`assign_channels`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMap {
    pub channel_of: Vec<usize>,
    pub cluster_of: Vec<usize>,
    pub n_channels: usize,
}

impl ChannelMap {
    pub fn len(&self) -> usize {
        self.channel_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_of.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_of.iter().max().map_or(0, |&c| c + 1)
    }

    /// True when no two devices share a channel.
    pub fn interference_free(&self) -> bool {
        self.n_clusters() <= 1
    }

    /// Co-channel sets `Z_i` for every device.
    pub fn interference_sets(&self) -> Vec<Vec<usize>> {
        let mut by_channel = vec![Vec::new(); self.n_channels];
        for (i, &c) in self.channel_of.iter().enumerate() {
            by_channel[c].push(i);
        }
        (0..self.len())
            .map(|i| {
                by_channel[self.channel_of[i]].iter().copied().filter(|&k| k != i).collect()
            })
            .collect()
    }
}

/// All devices other than `i` on `i`'s channel.
///
/// # Panics
/// If `i` is not mapped.
pub fn interference_set(i: usize, map: &ChannelMap) -> Vec<usize> {
    let c = map.channel_of[i];
    (0..map.len()).filter(|&k| k != i && map.channel_of[k] == c).collect()
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy
}

/// Cluster labels with sizes capped at `cap`, greedy by regret: points whose
/// best and second-best centroids differ most pick first.
fn capped_assignment(points: &[(f64, f64)], centroids: &[(f64, f64)], cap: usize) -> Vec<usize> {
    let k = centroids.len();
    let mut order: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut d: Vec<f64> = centroids.iter().map(|&c| sq_dist(p, c)).collect();
            d.sort_by(f64::total_cmp);
            let regret = if k > 1 { d[1] - d[0] } else { 0.0 };
            (i, regret)
        })
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut size = vec![0usize; k];
    let mut label = vec![0usize; points.len()];
    for (i, _) in order {
        let best = (0..k)
            .filter(|&c| size[c] < cap)
            .min_by(|&a, &b| sq_dist(points[i], centroids[a]).total_cmp(&sq_dist(points[i], centroids[b])))
            .expect("total capacity covers all points");
        size[best] += 1;
        label[i] = best;
    }
    label
}

fn centroids_of(points: &[(f64, f64)], label: &[usize], prev: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let k = prev.len();
    let mut sum = vec![(0.0, 0.0, 0usize); k];
    for (p, &l) in points.iter().zip(label) {
        sum[l].0 += p.0;
        sum[l].1 += p.1;
        sum[l].2 += 1;
    }
    sum.iter()
        .zip(prev)
        .map(|(&(x, y, n), &old)| if n == 0 { old } else { (x / n as f64, y / n as f64) })
        .collect()
}

fn within_cost(points: &[(f64, f64)], label: &[usize], centroids: &[(f64, f64)]) -> f64 {
    points.iter().zip(label).map(|(&p, &l)| sq_dist(p, centroids[l])).sum()
}

// k-means++ seeding
fn seed_centroids(points: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|&p| centroids.iter().map(|&c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick]);
    }
    centroids
}

fn constrained_kmeans(points: &[(f64, f64)], k: usize, cap: usize, seed: u64) -> (Vec<usize>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut label = capped_assignment(points, &centroids, cap);
    for _ in 0..MAX_LLOYD_ITERS {
        centroids = centroids_of(points, &label, &centroids);
        let next = capped_assignment(points, &centroids, cap);
        if next == label {
            break;
        }
        label = next;
    }
    let centroids = centroids_of(points, &label, &centroids);
    let cost = within_cost(points, &label, &centroids);
    (label, cost)
}

/// Group active devices into `ceil(L / R)` proximity clusters of size at
/// most `R` and give every member of a cluster its own channel.
///
/// # Panics
/// If `n_channels` is zero.
pub fn assign_channels(devices: &[Vec3], n_channels: usize, seed: u64) -> ChannelMap {
    assign_channels_with_restarts(devices, n_channels, seed, DEFAULT_RESTARTS)
}

pub fn assign_channels_with_restarts(
    devices: &[Vec3],
    n_channels: usize,
    seed: u64,
    restarts: usize,
) -> ChannelMap {
    assert!(n_channels >= 1, "at least one channel is required");
    let n = devices.len();
    let k = n.div_ceil(n_channels);
    let cluster_of = if k <= 1 {
        vec![0; n]
    } else if n_channels == 1 {
        (0..n).collect()
    } else {
        let points: Vec<(f64, f64)> = devices.iter().map(|d| (d.x, d.y)).collect();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for r in 0..restarts.max(1) {
            let (label, cost) = constrained_kmeans(&points, k, n_channels, seed.wrapping_add(r as u64));
            if best.as_ref().is_none_or(|b| cost < b.1) {
                best = Some((label, cost));
            }
        }
        relabel_by_first_member(&best.expect("at least one restart").0)
    };

    let mut next_channel = vec![0usize; k.max(1)];
    let channel_of = cluster_of
        .iter()
        .map(|&c| {
            let ch = next_channel[c];
            next_channel[c] += 1;
            ch
        })
        .collect();
    ChannelMap { channel_of, cluster_of, n_channels }
}

// cluster ids ordered by their lowest device index
fn relabel_by_first_member(label: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    label
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scatter(n: usize, seed: u64, side: f64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::ground(rng.random::<f64>() * side, rng.random::<f64>() * side))
            .collect()
    }

    fn check_invariants(map: &ChannelMap, n: usize, r: usize) {
        assert_eq!(map.len(), n);
        assert_eq!(map.n_clusters(), n.div_ceil(r));
        for c in 0..map.n_clusters() {
            let mut chans: Vec<usize> =
                (0..n).filter(|&i| map.cluster_of[i] == c).map(|i| map.channel_of[i]).collect();
            assert!(chans.len() <= r && !chans.is_empty());
            chans.sort_unstable();
            chans.dedup();
            assert_eq!(chans.len(), (0..n).filter(|&i| map.cluster_of[i] == c).count());
            assert!(chans.iter().all(|&ch| ch < r));
        }
    }

    #[test]
    fn few_devices_share_one_cluster() {
        let devices = scatter(7, 1, 500.0);
        let map = assign_channels(&devices, 7, 0);
        check_invariants(&map, 7, 7);
        assert!(map.interference_free());
        assert!(map.interference_sets().iter().all(Vec::is_empty));
    }

    #[test]
    fn single_channel_isolates_every_device() {
        let devices = scatter(5, 2, 500.0);
        let map = assign_channels(&devices, 1, 0);
        assert_eq!(map.cluster_of, vec![0, 1, 2, 3, 4]);
        assert!(map.channel_of.iter().all(|&c| c == 0));
        assert_eq!(interference_set(2, &map), vec![0, 1, 3, 4]);
    }

    #[test]
    fn two_blobs_match_exhaustive_partition() {
        let mut devices = scatter(4, 3, 30.0);
        devices.extend(scatter(4, 4, 30.0).into_iter().map(|p| Vec3::ground(p.x + 400.0, p.y + 250.0)));
        let map = assign_channels(&devices, 4, 9);
        check_invariants(&map, 8, 4);

        // enumerate every split into two groups of four
        let cost = |mask: u32| {
            let mut total = 0.0;
            for side in [true, false] {
                let members: Vec<&Vec3> =
                    (0..8).filter(|&i| (mask >> i & 1 == 1) == side).map(|i| &devices[i]).collect();
                let cx = members.iter().map(|p| p.x).sum::<f64>() / 4.0;
                let cy = members.iter().map(|p| p.y).sum::<f64>() / 4.0;
                total += members.iter().map(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2)).sum::<f64>();
            }
            total
        };
        let best = (0u32..256)
            .filter(|m| m.count_ones() == 4)
            .min_by(|&a, &b| cost(a).total_cmp(&cost(b)))
            .unwrap();
        for i in 0..8 {
            for k in 0..8 {
                let same_oracle = (best >> i & 1) == (best >> k & 1);
                assert_eq!(map.cluster_of[i] == map.cluster_of[k], same_oracle);
            }
        }
        // two clusters of size R: exactly one interferer each
        assert!(map.interference_sets().iter().all(|z| z.len() == 1));
    }

    #[test]
    fn interference_sets_match_linear_scan() {
        for seed in 0..20 {
            let devices = scatter(37, seed, 1000.0);
            let r = 1 + (seed as usize % 9);
            let map = assign_channels(&devices, r, seed);
            check_invariants(&map, 37, r);
            let sets = map.interference_sets();
            for (i, z) in sets.iter().enumerate() {
                assert_eq!(z, &interference_set(i, &map));
                assert!(!z.contains(&i));
                for &k in z {
                    assert!(sets[k].contains(&i));
                }
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let devices = scatter(60, 5, 1000.0);
        assert_eq!(assign_channels(&devices, 8, 3), assign_channels(&devices, 8, 3));
    }

    #[test]
    fn empty_input() {
        let map = assign_channels(&[], 4, 0);
        assert!(map.is_empty());
        assert_eq!(map.n_clusters(), 0);
    }
}
