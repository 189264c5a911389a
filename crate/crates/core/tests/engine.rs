use amas_core::grid::solve_power_flow;
use amas_core::metrics::{count_violations, OracleMode};
use amas_core::sim::{
    generate_scenario, Checkpoint, EngineOptions, Scenario, ScenarioConfig, Simulation, Strategy,
};

/// Two buses with three charge points each; strong lines.
fn small() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.feeder.buses_per_feeder = 2;
    cfg.feeder.households_per_bus = 3;
    cfg.feeder.pv_per_bus = 3;
    cfg.feeder.charge_points_per_bus = 3;
    cfg
}

fn traced() -> EngineOptions {
    EngineOptions {
        keep_traces: true,
        ..EngineOptions::default()
    }
}

fn scenario(cfg: &ScenarioConfig, seed: u64) -> Scenario {
    generate_scenario(cfg, seed).unwrap()
}

#[test]
fn zero_days_gives_empty_metrics() {
    let sc = scenario(&small(), 1);
    let mut sim = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    let m = sim.run_days(0).unwrap();
    assert!(m.days.is_empty() && m.ev_cost.is_empty() && m.ev_energy.is_empty());
}

#[test]
fn same_seed_same_metrics_and_traces() {
    let sc = scenario(&small(), 4);
    let mut a = Simulation::new(&sc, Strategy::Amas, traced()).unwrap();
    let mut b = Simulation::new(&sc, Strategy::Amas, traced()).unwrap();
    a.run_days(5).unwrap();
    b.run_days(5).unwrap();
    assert_eq!(a.metrics(), b.metrics());
    assert_eq!(a.traces(), b.traces());
    let other = scenario(&small(), 5);
    let mut c = Simulation::new(&other, Strategy::Amas, traced()).unwrap();
    c.run_days(5).unwrap();
    assert_ne!(a.metrics(), c.metrics());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let sc = scenario(&small(), 2);
    let mut whole = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    whole.run_days(12).unwrap();

    let mut first = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    first.run_days(7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.json");
    Checkpoint::capture(&first).save(&path).unwrap();

    let mut resumed = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    Checkpoint::load(&path)
        .unwrap()
        .apply(&mut resumed)
        .unwrap();
    assert_eq!(resumed.day(), 7);
    resumed.run_days(5).unwrap();
    assert_eq!(&whole.metrics().days[7..], &resumed.metrics().days[..]);
    assert_eq!(
        &whole.metrics().ev_cost[7..],
        &resumed.metrics().ev_cost[..]
    );
}

#[test]
fn checkpoint_from_another_scenario_is_rejected() {
    let sc = scenario(&small(), 2);
    let mut sim = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    sim.run_days(1).unwrap();
    let cp = Checkpoint::capture(&sim);
    let other = scenario(&small(), 3);
    let mut target = Simulation::new(&other, Strategy::Amas, EngineOptions::default()).unwrap();
    assert!(cp.apply(&mut target).is_err());
    let mut bad = cp.clone();
    bad.format = "something-else".into();
    assert!(bad.apply(&mut sim).is_err());
}

#[test]
fn uncontrolled_cost_is_arrival_anchored() {
    let mut cfg = small();
    cfg.feeder.pv_per_bus = 0;
    let sc = scenario(&cfg, 9);
    let mut sim = Simulation::new(&sc, Strategy::Uncontrolled, traced()).unwrap();
    sim.run_days(2).unwrap();
    let hours = sc.delta_i / 60.0;
    for (d, costs) in sim.metrics().ev_cost.iter().enumerate() {
        for (e, ev) in sc.fleet.iter().enumerate() {
            let need = (ev.soc_target - ev.soc_start) * ev.e_bat;
            let k = (need / (ev.p_max * ev.eta_chrg * hours)).ceil() as usize;
            let k = k.min(ev.t_depart - ev.t_arrive + 1);
            let expected: f64 = (ev.t_arrive..ev.t_arrive + k)
                .map(|i| sc.tariff(i) * ev.p_max * hours)
                .sum();
            assert!(
                (costs[e] - expected).abs() < 1e-9,
                "day {d} ev {e}: {} vs {expected}",
                costs[e]
            );
        }
    }
    assert_eq!(count_violations(sim.traces()), (0, 0));
    assert!(sim.metrics().days.iter().all(|d| d.unmet_evs == 0));
}

#[test]
fn battery_energy_is_accounted_for() {
    let sc = scenario(&small(), 6);
    let mut sim = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    let hours = sc.delta_i / 60.0;
    for day in 0..4 {
        sim.run_day().unwrap();
        for (e, (ev, state)) in sc.fleet.iter().zip(sim.ev_states()).enumerate() {
            let stored = (state.soc - ev.soc_start) * ev.e_bat;
            let pv_kwh: f64 = state.pv_absorbed.iter().sum::<f64>() / 1000.0 * hours;
            let grid = sim.metrics().ev_energy[day][e];
            assert!(
                (stored - (ev.eta_chrg * grid + pv_kwh)).abs() < 1e-9,
                "day {day} ev {e}"
            );
        }
    }
}

#[test]
fn bus_injections_match_the_actions_taken() {
    let sc = scenario(&small(), 8);
    let mut sim = Simulation::new(&sc, Strategy::Amas, traced()).unwrap();
    sim.run_day().unwrap();
    let net = &sc.topology;
    for t in sim.traces() {
        let i = t.instant;
        let mut loads: Vec<f64> = (0..net.buses().len())
            .map(|b| sc.household_load[b][i])
            .collect();
        for (p, panel) in sc.pv_panels.iter().enumerate() {
            loads[panel.bus] -= sc.pv_output(p, 0, i);
        }
        for (e, ev) in sc.fleet.iter().enumerate() {
            let kw = t.ev_power_kw[e];
            assert!(kw == 0.0 || kw == ev.p_max);
            assert!(
                kw == 0.0 || ev.is_connected(i),
                "phantom charge by ev {e} at {i}"
            );
            loads[ev.bus_id] += kw * 1000.0 + sim.ev_states()[e].pv_absorbed[i];
        }
        let sol = solve_power_flow(net, &loads, 1.0).unwrap();
        for (a, b) in sol.bus_voltages.iter().zip(&t.bus_voltages) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn curtailed_evs_never_charge_next_instant() {
    let mut cfg = small();
    cfg.feeder.head.rated_current_a = 60.0;
    cfg.feeder.segment.rated_current_a = 60.0;
    let sc = scenario(&cfg, 3);
    let mut sim = Simulation::new(&sc, Strategy::Amas, traced()).unwrap();
    sim.run_days(3).unwrap();
    let traces = sim.traces();
    let named: usize = traces.iter().map(|t| t.curtail_targets.len()).sum();
    assert!(named > 0, "the feeder should congest at least once");
    for pair in traces.windows(2) {
        if pair[0].day != pair[1].day {
            continue;
        }
        for &e in &pair[0].curtail_targets {
            assert_eq!(
                pair[1].ev_power_kw[e], 0.0,
                "ev {e} charged while curtailed"
            );
        }
    }
}

#[test]
fn forced_charging_floods_congestion_to_every_ev() {
    let mut cfg = small();
    cfg.fleet.arrival_hour.sd = 0.0;
    cfg.feeder.pv_per_bus = 0;
    // six 7 kW chargers plus households far exceed 40 A
    cfg.feeder.head.rated_current_a = 40.0;
    cfg.feeder.segment.rated_current_a = 40.0;
    let sc = scenario(&cfg, 1);
    let mut sim = Simulation::new(&sc, Strategy::Uncontrolled, traced()).unwrap();
    sim.run_day().unwrap();
    let arrival = sc.fleet[0].t_arrive;
    assert!(sc.fleet.iter().all(|ev| ev.t_arrive == arrival));
    let t = &sim.traces()[arrival];
    assert!(t.current_violation());
    assert!(t.originated_requests > 0);
    assert!(t.flood_rounds <= sim.graph().diameter());
    for (e, r) in t.rewards.iter().enumerate() {
        assert_eq!(*r, Some(-1.0), "ev {e} did not see the congestion");
    }
}

#[test]
fn flooding_ends_within_the_diameter() {
    let mut cfg = small();
    cfg.feeder.sub_districts = 3;
    cfg.feeder.head.rated_current_a = 50.0;
    cfg.feeder.segment.rated_current_a = 50.0;
    let sc = scenario(&cfg, 2);
    let mut sim = Simulation::new(&sc, Strategy::Amas, traced()).unwrap();
    sim.run_days(2).unwrap();
    let diameter = sim.graph().diameter();
    assert!(sim.traces().iter().any(|t| t.flood_rounds > 0));
    assert!(sim.traces().iter().all(|t| t.flood_rounds <= diameter));
}

#[test]
fn quiet_feeder_sends_nothing() {
    let mut cfg = small();
    cfg.fleet.size = Some(0);
    let sc = scenario(&cfg, 1);
    assert!(sc.fleet.is_empty());
    for strategy in [Strategy::Amas, Strategy::Uncontrolled, Strategy::Oracle] {
        let mut sim = Simulation::new(&sc, strategy, traced()).unwrap();
        let m = sim.run_days(2).unwrap().clone();
        assert!(m
            .days
            .iter()
            .all(|d| d.total_cost == 0.0 && d.mean_reward.is_none()));
        assert_eq!(count_violations(sim.traces()), (0, 0));
        assert!(sim
            .traces()
            .iter()
            .all(|t| t.originated_requests == 0 && t.messages == 0));
    }
}

#[test]
fn fleet_cost_is_the_sum_of_ev_costs() {
    let sc = scenario(&small(), 5);
    let mut sim = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    sim.run_days(3).unwrap();
    let m = sim.metrics();
    for (d, day) in m.days.iter().enumerate() {
        assert_eq!(day.total_cost, m.ev_cost[d].iter().sum::<f64>());
    }
}

#[test]
fn exhaustive_oracle_is_cheapest_on_tiny_feeders() {
    let mut cfg = ScenarioConfig::default();
    cfg.time.instants_per_day = 12;
    cfg.feeder.buses_per_feeder = 1;
    cfg.feeder.households_per_bus = 3;
    cfg.feeder.pv_per_bus = 3;
    cfg.feeder.charge_points_per_bus = 3;
    cfg.feeder.head.rated_current_a = 90.0;
    let options = EngineOptions {
        oracle_mode: OracleMode::Exhaustive,
        ..EngineOptions::default()
    };
    for seed in 1..4 {
        let sc = scenario(&cfg, seed);
        let cost = |s: Strategy| {
            let mut sim = Simulation::new(&sc, s, options.clone()).unwrap();
            sim.run_days(40).unwrap();
            sim.metrics().total_cost(20..40)
        };
        let (o, a, u) = (
            cost(Strategy::Oracle),
            cost(Strategy::Amas),
            cost(Strategy::Uncontrolled),
        );
        assert!(o <= a && a <= u, "seed {seed}: {o} {a} {u}");
    }
}

#[test]
fn small_scale_run_converges_to_a_fair_plateau() {
    let mut cfg = ScenarioConfig::default();
    cfg.fleet.size = Some(55);
    let sc = scenario(&cfg, 1);
    assert!(sc.fleet.iter().all(|ev| ev.e_bat == 52.0
        && ev.p_max == 7.0
        && ev.eta_chrg == 0.95
        && ev.soc_target == 0.8));
    let mut sim = Simulation::new(&sc, Strategy::Amas, EngineOptions::default()).unwrap();
    let m = sim.run_days(60).unwrap();
    // reported small-scale fairness 0.994
    let f = m.fairness_over(30..60).unwrap();
    assert!((f - 0.994).abs() <= 0.03, "fairness {f}");
    assert!(m.mean_reward(50..60).unwrap() > m.mean_reward(0..5).unwrap());
    let rewards: Vec<Option<f64>> = m.days.iter().map(|d| d.mean_reward).collect();
    let (_, day) = amas_core::report::convergence(&rewards);
    assert!(day.is_some_and(|d| d <= 30), "converged on day {day:?}");
}
