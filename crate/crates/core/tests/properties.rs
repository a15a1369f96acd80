//! Randomized invariants across modules.

use proptest::prelude::*;

use aerial_iot::assignment::{hungarian, CostMatrix};
use aerial_iot::geo::{avg_path_loss, sinr};
use aerial_iot::mobility::{leg_cost, plan_relocation, AirframeParams, MobilityError};
use aerial_iot::power::{joint_power_association, QosParams};
use aerial_iot::spectrum::assign_channels;
use aerial_iot::{Environment, Vec3};

fn permutations(n: usize, cols: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, cols: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..cols {
            if !prefix.contains(&c) {
                prefix.push(c);
                rec(prefix, n, cols, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, cols, &mut out);
    out
}

fn ground(max: f64) -> impl Strategy<Value = Vec3> {
    (0.0..max, 0.0..max).prop_map(|(x, y)| Vec3::ground(x, y))
}

fn aerial(max: f64) -> impl Strategy<Value = Vec3> {
    (0.0..max, 0.0..max, 50.0..400.0).prop_map(|(x, y, h)| Vec3::new(x, y, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hungarian_matches_brute_force(rows in 1usize..5, extra in 0usize..3, seed in proptest::collection::vec(0.0..100.0f64, 64)) {
        let cols = rows + extra;
        let m = CostMatrix::from_fn(rows, cols, |r, c| seed[r * cols + c]).unwrap();
        let got = hungarian(&m).unwrap();
        let best = permutations(rows, cols)
            .iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| m.get(r, c)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((got.total_cost - best).abs() <= 1e-9 * best.max(1.0));
        let mut used = got.row_to_col.clone();
        used.sort_unstable();
        used.dedup();
        prop_assert_eq!(used.len(), rows);
    }

    #[test]
    fn hungarian_ignores_row_offsets(n in 1usize..6, seed in proptest::collection::vec(0.0..100.0f64, 36), shift in proptest::collection::vec(-50.0..50.0f64, 6)) {
        let a = CostMatrix::from_fn(n, n, |r, c| seed[r * n + c]).unwrap();
        let b = CostMatrix::from_fn(n, n, |r, c| seed[r * n + c] + shift[r]).unwrap();
        let ca = hungarian(&a).unwrap().total_cost;
        let cb = hungarian(&b).unwrap().total_cost;
        let offset: f64 = shift[..n].iter().sum();
        prop_assert!((cb - ca - offset).abs() <= 1e-9 * (ca.abs() + offset.abs()).max(1.0));
    }

    #[test]
    fn path_loss_grows_with_horizontal_distance(h in 50.0..500.0f64, r in 0.0..2000.0f64, dr in 1.0..500.0f64) {
        let env = Environment::urban();
        let d = Vec3::ground(0.0, 0.0);
        let near = avg_path_loss(&d, &Vec3::new(r, 0.0, h), &env).unwrap();
        let far = avg_path_loss(&d, &Vec3::new(r + dr, 0.0, h), &env).unwrap();
        prop_assert!(far > near);
        // sandwiched between the pure LoS and pure NLoS losses
        let dist = (r * r + h * h).sqrt();
        let spread = (env.k_o() * dist).powi(2);
        prop_assert!(near >= env.eta_los * spread * (1.0 - 1e-12));
        prop_assert!(near <= env.eta_nlos * spread * (1.0 + 1e-12));
    }

    #[test]
    fn channel_maps_respect_capacity(devices in proptest::collection::vec(ground(1000.0), 1..60), r in 1usize..12, seed in any::<u64>()) {
        let map = assign_channels(&devices, r, seed);
        prop_assert_eq!(map.len(), devices.len());
        let k = devices.len().div_ceil(r);
        prop_assert_eq!(map.n_clusters(), k);
        let sets = map.interference_sets();
        for (i, z) in sets.iter().enumerate() {
            prop_assert!(map.channel_of[i] < r);
            prop_assert!(!z.contains(&i));
            for &m in z {
                prop_assert_eq!(map.channel_of[m], map.channel_of[i]);
                prop_assert!(sets[m].contains(&i));
            }
        }
        // members of one cluster never share a channel
        for c in 0..k {
            let mut ch: Vec<usize> = (0..map.len()).filter(|&i| map.cluster_of[i] == c).map(|i| map.channel_of[i]).collect();
            prop_assert!(ch.len() <= r);
            ch.sort_unstable();
            ch.dedup();
            prop_assert_eq!(ch.len(), (0..map.len()).filter(|&i| map.cluster_of[i] == c).count());
        }
    }

    #[test]
    fn power_control_hits_the_target(devices in proptest::collection::vec(ground(1000.0), 2..25), uavs in proptest::collection::vec(aerial(1000.0), 1..4), r in 2usize..8, seed in any::<u64>()) {
        let env = Environment::urban();
        let qos = QosParams::new(10f64.powf(0.5), 0.2);
        let map = assign_channels(&devices, r, seed);
        let z = map.interference_sets();
        let sol = joint_power_association(&uavs, &devices, &z, &env, &qos, None);
        prop_assume!(sol.converged);
        for i in 0..devices.len() {
            if sol.served[i] {
                let s = sinr(i, &devices, &uavs, &sol.assoc, &sol.power_w, &z[i], &env).unwrap();
                prop_assert!((s / qos.gamma - 1.0).abs() <= 1e-6, "device {i}: SINR {s}");
            } else {
                prop_assert_eq!(sol.power_w[i], qos.p_max_w);
            }
        }
        let again = joint_power_association(&uavs, &devices, &z, &env, &qos, Some(&sol.power_w));
        prop_assert_eq!(&again.assoc, &sol.assoc);
        for (a, b) in again.power_w.iter().zip(&sol.power_w) {
            prop_assert!((a - b).abs() <= 1e-8 * b);
        }
    }

    #[test]
    fn relocation_ledger_balances(from in proptest::collection::vec(aerial(1000.0), 1..5), to in proptest::collection::vec(aerial(1000.0), 5), budget in 1e4..5e5f64) {
        let k = from.len();
        let to = &to[..k];
        let p = AirframeParams::default();
        let remaining = vec![budget; k];
        let plan = match plan_relocation(&from, to, &remaining, &p) {
            Ok(plan) => plan,
            Err(MobilityError::Infeasible { partial, .. }) => *partial,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for u in 0..k {
            prop_assert!(plan.remaining_j[u] >= -1e-9);
            prop_assert!((plan.remaining_j[u] + plan.leg_energy_j[u] - budget).abs() <= 1e-9 * budget);
            if plan.stranded.contains(&u) {
                prop_assert_eq!(plan.positions[u], from[u]);
                prop_assert_eq!(plan.leg_energy_j[u], 0.0);
            } else {
                let dest = to[plan.assignment[u]];
                prop_assert_eq!(plan.positions[u], dest);
                let leg = leg_cost(&from[u], &dest, &p);
                prop_assert_eq!(plan.leg_energy_j[u], leg.energy_j);
                prop_assert_eq!(plan.fallback_legs[u], leg.fallback);
                prop_assert!(leg.energy_j <= budget);
            }
        }
    }
}
