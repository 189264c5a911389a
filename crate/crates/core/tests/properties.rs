use amas_core::agents::{bus_criticality, ev_reward, line_criticality, Criticality};
use amas_core::bandit::{select_super_arm, LinearLearner, UpdateRule};
use amas_core::grid::{
    build_replicated_feeder, power_mismatch, solve_power_flow, FeederSpec, LineSpec,
};
use amas_core::metrics::fairness_index;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn brute_force_best(theta: &[f64], candidates: &[usize], k: usize) -> f64 {
    let n = candidates.len();
    (0u32..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| {
            (0..n)
                .filter(|i| s >> i & 1 == 1)
                .map(|i| theta[candidates[i]])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(m, theta, candidates, k)` with `k ≤ 4` and `k ≤ |candidates|`.
fn topk_case() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, usize)> {
    (1usize..=12).prop_flat_map(|m| {
        (
            prop::collection::vec(-1.0f64..1.0, m),
            prop::sample::subsequence((0..m).collect::<Vec<_>>(), 0..=m),
        )
            .prop_flat_map(|(theta, cands)| {
                let kmax = cands.len().min(4);
                (Just(theta), Just(cands), 0..=kmax)
            })
    })
}

fn updates(m: usize) -> impl Strategy<Value = Vec<(Vec<bool>, Vec<f64>)>> {
    prop::collection::vec(
        (
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(-1.0f64..1.0, m),
        )
            .prop_map(|(mask, obs)| {
                let obs = mask
                    .iter()
                    .zip(obs)
                    .map(|(&p, o)| if p { o } else { 0.0 })
                    .collect();
                (mask, obs)
            }),
        0..25,
    )
}

fn rule() -> impl Strategy<Value = UpdateRule> {
    prop_oneof![Just(UpdateRule::RankOne), Just(UpdateRule::PerArm)]
}

fn feeder(subs: usize, buses: usize, r: f64) -> FeederSpec {
    let line = LineSpec {
        resistance_ohm: r,
        reactance_ohm: 0.0,
        rated_current_a: 1000.0,
    };
    FeederSpec {
        sub_districts: subs,
        buses_per_feeder: buses,
        trunk: line,
        head: line,
        segment: line,
        ..FeederSpec::default()
    }
}

proptest! {
    #[test]
    fn top_k_matches_enumeration((theta, cands, k) in topk_case()) {
        let arm = select_super_arm(&theta, &cands, k).unwrap();
        prop_assert_eq!(arm.len(), k);
        prop_assert!(arm.selected().iter().all(|i| cands.contains(i)));
        let best = brute_force_best(&theta, &cands, k);
        prop_assert!((arm.value(&theta) - best).abs() < 1e-12);
    }

    #[test]
    fn gram_stays_symmetric_positive_definite(
        (m, seq) in (1usize..=10).prop_flat_map(|m| (Just(m), updates(m))),
        rule in rule(),
    ) {
        let mut l = LinearLearner::<f64>::new(m, 1.0, rule).unwrap();
        for (mask, obs) in &seq {
            l.update(mask, obs).unwrap();
        }
        let g = l.gram().clone();
        prop_assert_eq!(&g, &g.transpose());
        let min = SymmetricEigen::new(g).eigenvalues.min();
        prop_assert!(min >= 1.0 - 1e-9, "smallest eigenvalue {min}");
    }

    /// The estimate equals the closed-form ridge solution of the accumulated
    /// counts: per arm it is `Σ r / (1 + plays)`.
    #[test]
    fn per_arm_estimate_is_ridge_mean(
        (m, seq) in (1usize..=10).prop_flat_map(|m| (Just(m), updates(m))),
    ) {
        let mut l = LinearLearner::<f64>::new(m, 0.5, UpdateRule::PerArm).unwrap();
        let mut plays = vec![0.0; m];
        let mut sums = vec![0.0; m];
        for (mask, obs) in &seq {
            l.update(mask, obs).unwrap();
            for i in 0..m {
                if mask[i] {
                    plays[i] += 1.0;
                    sums[i] += obs[i];
                }
            }
        }
        for i in 0..m {
            prop_assert!((l.estimate()[i] - sums[i] / (1.0 + plays[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_instants_permutes_estimate(
        (m, seq, perm) in (2usize..=8).prop_flat_map(|m| {
            (Just(m), updates(m), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
        }),
        rule in rule(),
    ) {
        let mut plain = LinearLearner::<f64>::new(m, 1.0, rule).unwrap();
        let mut permuted = LinearLearner::<f64>::new(m, 1.0, rule).unwrap();
        for (mask, obs) in &seq {
            plain.update(mask, obs).unwrap();
            let pm: Vec<bool> = (0..m).map(|i| mask[perm[i]]).collect();
            let po: Vec<f64> = (0..m).map(|i| obs[perm[i]]).collect();
            permuted.update(&pm, &po).unwrap();
        }
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((permuted.estimate()[i] - plain.estimate()[p]).abs() < 1e-10);
        }
    }

    #[test]
    fn fairness_is_scale_invariant(
        costs in prop::collection::vec(0.01f64..10.0, 1..40),
        scale in 0.001f64..1000.0,
    ) {
        let f = fairness_index(&costs).unwrap();
        prop_assert!(f > 0.0 && f <= 1.0);
        let scaled: Vec<f64> = costs.iter().map(|c| c * scale).collect();
        prop_assert!((fairness_index(&scaled).unwrap() - f).abs() < 1e-9);
    }

    #[test]
    fn every_feeder_is_a_tree(subs in 1usize..6, buses in 1usize..15) {
        let net = build_replicated_feeder::<f64>(&feeder(subs, buses, 0.01)).unwrap();
        let n = net.buses().len();
        prop_assert_eq!(net.lines().len(), n - 1);
        prop_assert_eq!(n, feeder(subs, buses, 0.01).bus_count());
        // connected: every bus walks up to the slack
        for b in 0..n {
            let mut at = b;
            let mut hops = 0;
            while let Some(p) = net.parent_bus(at) {
                at = p;
                hops += 1;
                prop_assert!(hops <= n);
            }
            prop_assert_eq!(at, net.slack_bus());
        }
    }

    #[test]
    fn more_load_never_raises_the_leaf_voltage(
        buses in 1usize..8,
        base in prop::collection::vec(0.0f64..3000.0, 8),
        extra in 0.0f64..5000.0,
    ) {
        let net = build_replicated_feeder::<f64>(&feeder(1, buses, 0.02)).unwrap();
        let n = net.buses().len();
        let mut loads: Vec<f64> = (0..n).map(|b| if b == net.slack_bus() { 0.0 } else { base[b % 8] }).collect();
        let leaf = n - 1;
        let before = solve_power_flow(&net, &loads, 1.0).unwrap();
        loads[leaf] += extra;
        let after = solve_power_flow(&net, &loads, 1.0).unwrap();
        prop_assert!(before.converged && after.converged);
        prop_assert!(after.bus_voltages[leaf] <= before.bus_voltages[leaf] + 1e-12);
    }

    #[test]
    fn converged_sweeps_balance_every_bus(
        subs in 1usize..4,
        buses in 1usize..6,
        loads in prop::collection::vec(-4000.0f64..8000.0, 32),
    ) {
        let net = build_replicated_feeder::<f64>(&feeder(subs, buses, 0.005)).unwrap();
        let n = net.buses().len();
        let p: Vec<f64> = (0..n).map(|b| if b == net.slack_bus() { 0.0 } else { loads[b % 32] }).collect();
        let sol = solve_power_flow(&net, &p, 1.0).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(power_mismatch(&net, &p, &sol) < 1e-3);
    }

    #[test]
    fn criticalities_and_rewards_stay_in_range(
        current in 0.0f64..2000.0,
        rated in 1.0f64..2000.0,
        v in 0.8f64..1.2,
        cost in 0.0f64..1.0,
        neighbours in prop::collection::vec(prop_oneof![Just(-1.0), Just(0.0), Just(1.0), 0.0f64..1.0], 0..6),
    ) {
        let l = line_criticality(current, rated).value();
        prop_assert!(l == 0.0 || l == 1.0);
        let b = bus_criticality(v, 0.95, 1.05).value();
        prop_assert!([-1.0, 0.0, 1.0].contains(&b));
        let n: Vec<Criticality> = neighbours.into_iter().map(Criticality::new).collect();
        let r = ev_reward(Criticality::new(cost), &n);
        prop_assert!((-1.0..=1.0).contains(&r));
    }
}

#[test]
fn estimate_converges_on_played_arms() {
    let theta = [0.2, 0.7, -0.3, 0.5, 0.9, 0.1];
    let mut l = LinearLearner::<f64>::new(theta.len(), 0.0, UpdateRule::PerArm).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mask = [true, true, false, true, true, false];
    for _ in 0..1000 {
        let obs: Vec<f64> = (0..theta.len())
            .map(|i| {
                if mask[i] {
                    theta[i] + noise.sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        l.update(&mask, &obs).unwrap();
    }
    for i in (0..theta.len()).filter(|&i| mask[i]) {
        assert!(
            (l.estimate()[i] - theta[i]).abs() < 0.05,
            "arm {i}: {} vs {}",
            l.estimate()[i],
            theta[i]
        );
    }
}
