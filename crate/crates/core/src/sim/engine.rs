use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flood::AgentGraph;
use super::Scenario;
use crate::agents::{
    bus_criticality, ev_decide, ev_record, line_criticality, sample_cooperation_targets,
    target_count, AgentRef, Criticality, CriticalityRequest, EvState, OriginKind,
};
use crate::bandit::{DailySelection, SuperArm, UpdateRule};
use crate::grid::{power_mismatch, solve_power_flow};
use crate::metrics::{
    centralized_oracle, fairness_index, mean_daily_reward, per_unit_costs, uncontrolled_action,
    DayMetrics, InstantTrace, OracleMode, SimulationMetrics,
};
use crate::{Learner, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Amas,
    Uncontrolled,
    Oracle,
}

impl std::str::FromStr for Strategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amas" => Ok(Strategy::Amas),
            "uncontrolled" => Ok(Strategy::Uncontrolled),
            "oracle" => Ok(Strategy::Oracle),
            other => Err(crate::Error::Config(format!(
                "unknown strategy `{other}` (expected amas, uncontrolled or oracle)"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Amas => "amas",
            Strategy::Uncontrolled => "uncontrolled",
            Strategy::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Exploration scale of the reward learner.
    pub alpha: f64,
    /// Exploration scale of the PV learner, watt; `None` means 10 % of the
    /// rated PV power.
    pub beta: Option<f64>,
    pub update_rule: UpdateRule,
    /// Share of the candidate EVs named in each request.
    pub target_fraction: f64,
    pub slack_pu: f64,
    pub oracle_mode: OracleMode,
    /// Keep every [`InstantTrace`]; memory grows with days × instants.
    pub keep_traces: bool,
    /// Keep every EV's daily super arm and estimate for regret analysis.
    pub record_selections: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: None,
            update_rule: UpdateRule::PerArm,
            target_fraction: 0.05,
            slack_pu: 1.0,
            oracle_mode: OracleMode::Greedy,
            keep_traces: false,
            record_selections: false,
        }
    }
}

const AGENT_STREAM_KEY: u64 = 0x5EED_A6E7_0000_0001;
const NETWORK_STREAM_KEY: u64 = 0x5EED_6E77_0000_0002;

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream of one EV on one day; independent of how many days ran before.
fn agent_rng(seed: u64, ev: usize, day: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, AGENT_STREAM_KEY));
    rng.set_stream(((ev as u64) << 32) | day as u64);
    rng
}

fn network_rng(seed: u64, day: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, NETWORK_STREAM_KEY));
    rng.set_stream(day as u64);
    rng
}

/// Multi-day driver of one strategy on one scenario.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    strategy: Strategy,
    options: EngineOptions,
    graph: AgentGraph,
    /// EVs plugged in at or below each bus.
    subtree_evs: Vec<Vec<usize>>,
    /// Child bus of each line.
    line_child: Vec<usize>,
    theta: Vec<Learner>,
    phi: Vec<Learner>,
    states: Vec<EvState>,
    day: usize,
    metrics: SimulationMetrics,
    traces: Vec<InstantTrace>,
    selections: Vec<Vec<DailySelection<f64>>>,
    day_estimates: Vec<Vec<f64>>,
    oracle_plan: Option<Vec<Vec<bool>>>,
}

struct DayAccumulator {
    current_violations: usize,
    voltage_violations: usize,
    curtailments: usize,
    max_mismatch_va: f64,
    max_flood_rounds: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, strategy: Strategy, options: EngineOptions) -> Result<Self> {
        let net = &scenario.topology;
        let ev_buses: Vec<usize> = scenario.fleet.iter().map(|ev| ev.bus_id).collect();
        let graph = AgentGraph::new(net, &ev_buses);

        let mut subtree_evs = vec![Vec::new(); net.buses().len()];
        for ev in &scenario.fleet {
            subtree_evs[ev.bus_id].push(ev.ev_id);
        }
        for &b in net.root_first_order().iter().rev() {
            if let Some(parent) = net.parent_bus(b) {
                let below = subtree_evs[b].clone();
                subtree_evs[parent].extend(below);
            }
        }
        for evs in &mut subtree_evs {
            evs.sort_unstable();
        }
        let mut line_child = vec![0; net.lines().len()];
        for b in 0..net.buses().len() {
            if let Some(l) = net.parent_line(b) {
                line_child[l] = b;
            }
        }

        let m = scenario.m;
        let beta = options.beta.unwrap_or(0.1 * scenario.rated_pv_power());
        let mut theta = Vec::with_capacity(scenario.fleet.len());
        let mut phi = Vec::with_capacity(scenario.fleet.len());
        for _ in &scenario.fleet {
            theta.push(Learner::new(m, options.alpha, options.update_rule)?);
            phi.push(Learner::new(m, beta, options.update_rule)?);
        }
        let states = scenario
            .fleet
            .iter()
            .map(|ev| EvState::new(ev, m))
            .collect();
        Ok(Self {
            scenario,
            strategy,
            options,
            graph,
            subtree_evs,
            line_child,
            theta,
            phi,
            states,
            day: 0,
            metrics: SimulationMetrics::default(),
            traces: Vec::new(),
            selections: vec![Vec::new(); scenario.fleet.len()],
            day_estimates: vec![Vec::new(); scenario.fleet.len()],
            oracle_plan: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    /// Index of the next day to simulate.
    pub fn day(&self) -> usize {
        self.day
    }

    pub fn metrics(&self) -> &SimulationMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> SimulationMetrics {
        self.metrics
    }

    pub fn traces(&self) -> &[InstantTrace] {
        &self.traces
    }

    pub fn graph(&self) -> &AgentGraph {
        &self.graph
    }

    /// Per EV, the daily selections recorded when `record_selections` is on.
    pub fn selections(&self) -> &[Vec<DailySelection<f64>>] {
        &self.selections
    }

    pub fn theta_learners(&self) -> &[Learner] {
        &self.theta
    }

    pub fn pv_learners(&self) -> &[Learner] {
        &self.phi
    }

    pub fn ev_states(&self) -> &[EvState] {
        &self.states
    }

    pub(crate) fn restore(&mut self, day: usize, theta: Vec<Learner>, phi: Vec<Learner>) {
        self.day = day;
        self.theta = theta;
        self.phi = phi;
    }

    pub fn run_days(&mut self, days: usize) -> Result<&SimulationMetrics> {
        for _ in 0..days {
            self.run_day()?;
        }
        Ok(&self.metrics)
    }

    pub fn run_day(&mut self) -> Result<&DayMetrics> {
        let day = self.day;
        self.start_day(day)?;
        let mut acc = DayAccumulator {
            current_violations: 0,
            voltage_violations: 0,
            curtailments: 0,
            max_mismatch_va: 0.0,
            max_flood_rounds: 0,
        };
        let mut net_rng = network_rng(self.scenario.seed, day);
        for now in 0..self.scenario.m {
            let trace = self.run_instant(day, now, &mut net_rng, &mut acc)?;
            acc.current_violations += usize::from(trace.current_violation());
            acc.voltage_violations += usize::from(trace.voltage_violation());
            acc.max_mismatch_va = acc.max_mismatch_va.max(trace.mismatch_va.unwrap_or(0.0));
            acc.max_flood_rounds = acc.max_flood_rounds.max(trace.flood_rounds);
            if self.options.keep_traces {
                self.traces.push(trace);
            }
        }
        self.end_day(day, acc)?;
        self.day += 1;
        Ok(self.metrics.days.last().expect("day just pushed"))
    }

    fn start_day(&mut self, day: usize) -> Result<()> {
        let sc = self.scenario;
        for (e, ev) in sc.fleet.iter().enumerate() {
            let (theta, phi) = if self.strategy == Strategy::Amas {
                let mut rng = agent_rng(sc.seed, e, day);
                let theta = self.theta[e].sample(&mut rng).iter().copied().collect();
                let phi = self.phi[e].sample(&mut rng).iter().copied().collect();
                (theta, phi)
            } else {
                (vec![0.0; sc.m], vec![0.0; sc.m])
            };
            self.states[e].start_day(ev, theta, phi);
            if self.options.record_selections {
                self.day_estimates[e] = self.theta[e].estimate().iter().copied().collect();
            }
        }
        self.oracle_plan = match self.strategy {
            Strategy::Oracle => Some(
                centralized_oracle(sc, day, self.options.oracle_mode, self.options.slack_pu)?
                    .schedules,
            ),
            _ => None,
        };
        Ok(())
    }

    /// One agent cycle: decide, apply, solve, sense, flood, record.
    fn run_instant(
        &mut self,
        day: usize,
        now: usize,
        net_rng: &mut ChaCha8Rng,
        acc: &mut DayAccumulator,
    ) -> Result<InstantTrace> {
        let sc = self.scenario;
        let net = &sc.topology;
        let n_ev = sc.fleet.len();

        // decisions on the requests delivered last instant
        let mut charging = vec![false; n_ev];
        for (e, ev) in sc.fleet.iter().enumerate() {
            let state = &self.states[e];
            charging[e] = match self.strategy {
                Strategy::Amas => {
                    let d = ev_decide(ev, state, now, sc.delta_i)?;
                    if d.curtailed && (d.planned || d.boosted) {
                        acc.curtailments += 1;
                    }
                    d.charge
                }
                Strategy::Uncontrolled => uncontrolled_action(ev, state, now),
                Strategy::Oracle => {
                    let plan = self.oracle_plan.as_ref().expect("plan made at day start");
                    ev.is_connected(now) && plan[e][now] && state.needs_energy(ev)
                }
            };
        }

        // energy flows and bus loads
        let mut loads: Vec<f64> = (0..net.buses().len())
            .map(|b| sc.household_load[b][now])
            .collect();
        for (p, panel) in sc.pv_panels.iter().enumerate() {
            loads[panel.bus] -= sc.pv_output(p, day, now);
        }
        let mut ev_power = vec![0.0; n_ev];
        for (e, ev) in sc.fleet.iter().enumerate() {
            let grid_kw = if charging[e] { ev.p_max } else { 0.0 };
            ev_power[e] = grid_kw;
            if ev.is_connected(now) {
                let pv = ev.pv_panel.map_or(0.0, |p| sc.pv_output(p, day, now));
                let absorbed = self.states[e].apply_energy(ev, now, grid_kw, pv, sc.delta_i);
                loads[ev.bus_id] += grid_kw * 1000.0 + absorbed;
                self.states[e].cost += sc.tariff(now) * grid_kw * sc.hours_per_instant();
            }
        }

        let sol = solve_power_flow(net, &loads, self.options.slack_pu)?;
        let mismatch_va = sol.converged.then(|| power_mismatch(net, &loads, &sol));

        // sensing and request origination
        let mut own: Vec<Option<CriticalityRequest>> = vec![None; self.graph.len()];
        let charging_all: Vec<usize> = (0..n_ev).filter(|&e| charging[e]).collect();
        let waiting_all: Vec<usize> = (0..n_ev)
            .filter(|&e| {
                let ev = &sc.fleet[e];
                !charging[e] && ev.is_connected(now) && self.states[e].needs_energy(ev)
            })
            .collect();
        let mut originated = 0;
        let fraction = self.options.target_fraction;
        let mut originate = |cr: Criticality,
                             below: &[usize],
                             kind: OriginKind,
                             origin: usize,
                             rng: &mut ChaCha8Rng|
         -> Option<CriticalityRequest> {
            if !cr.is_critical() {
                return None;
            }
            let (local, global) = if cr.value() > 0.0 {
                (
                    below
                        .iter()
                        .copied()
                        .filter(|&e| charging[e])
                        .collect::<Vec<_>>(),
                    &charging_all,
                )
            } else {
                (
                    below
                        .iter()
                        .copied()
                        .filter(|e| waiting_all.binary_search(e).is_ok())
                        .collect(),
                    &waiting_all,
                )
            };
            let pool = if local.is_empty() {
                global.clone()
            } else {
                local
            };
            let targets = if pool.is_empty() {
                Vec::new()
            } else {
                sample_cooperation_targets(&pool, target_count(pool.len(), fraction), rng)
            };
            originated += 1;
            Some(CriticalityRequest {
                criticality: cr,
                target_evs: targets,
                origin_agent: origin,
                origin_kind: kind,
                instant: now,
            })
        };
        if sol.converged {
            for (l, line) in net.lines().iter().enumerate() {
                let cr = line_criticality(sol.line_currents[l], line.i_rated);
                own[self.graph.node(AgentRef::Line(l))] = originate(
                    cr,
                    &self.subtree_evs[self.line_child[l]],
                    OriginKind::Line,
                    l,
                    net_rng,
                );
            }
            for (b, bus) in net.buses().iter().enumerate() {
                let cr = bus_criticality(sol.bus_voltages[b], bus.v_min, bus.v_max);
                own[self.graph.node(AgentRef::Bus(b))] =
                    originate(cr, &self.subtree_evs[b], OriginKind::Bus, b, net_rng);
            }
        } else {
            // a collapsed sweep reads as congestion on every line
            for l in 0..net.lines().len() {
                own[self.graph.node(AgentRef::Line(l))] = originate(
                    Criticality::CRITICAL,
                    &self.subtree_evs[self.line_child[l]],
                    OriginKind::Line,
                    l,
                    net_rng,
                );
            }
        }
        let flood = self.graph.flood(&own);

        // perception
        let mut rewards = vec![None; n_ev];
        let mut curtail_targets = Vec::new();
        for (e, ev) in sc.fleet.iter().enumerate() {
            let delivered = &flood.delivered[e];
            if delivered
                .iter()
                .any(|r| r.criticality.value() > 0.0 && r.targets(ev.ev_id))
            {
                curtail_targets.push(e);
            }
            if ev.is_connected(now) {
                let received: Vec<Criticality> = delivered.iter().map(|r| r.criticality).collect();
                let reading = ev.pv_panel.map_or(0.0, |p| sc.pv_output(p, day, now));
                let cost = Criticality::new(sc.price[now]);
                ev_record(
                    ev,
                    &mut self.states[e],
                    now,
                    charging[e],
                    cost,
                    &received,
                    reading,
                );
                if charging[e] {
                    rewards[e] = Some(self.states[e].reward_trace[now]);
                }
            }
            self.states[e].pending = delivered.clone();
        }

        Ok(InstantTrace {
            day,
            instant: now,
            line_currents: sol.line_currents.clone(),
            line_ratings: net.lines().iter().map(|l| l.i_rated).collect(),
            bus_voltages: sol.bus_voltages.clone(),
            voltage_limits: net.buses().iter().map(|b| (b.v_min, b.v_max)).collect(),
            converged: sol.converged,
            mismatch_va,
            ev_power_kw: ev_power,
            rewards,
            curtail_targets,
            originated_requests: originated,
            flood_rounds: flood.rounds,
            messages: flood.messages,
        })
    }

    fn end_day(&mut self, day: usize, acc: DayAccumulator) -> Result<()> {
        let sc = self.scenario;
        let mut rewards = Vec::with_capacity(sc.fleet.len());
        let mut costs = Vec::with_capacity(sc.fleet.len());
        let mut energies = Vec::with_capacity(sc.fleet.len());
        let mut unmet = 0;
        for (e, ev) in sc.fleet.iter().enumerate() {
            let state = &self.states[e];
            rewards.push(
                (0..sc.m)
                    .filter(|&i| state.played_mask[i])
                    .map(|i| state.reward_trace[i])
                    .collect::<Vec<f64>>(),
            );
            costs.push(state.cost);
            energies.push(state.grid_energy_kwh);
            let slack = ev.energy_per_instant(sc.delta_i) / ev.e_bat;
            if state.soc < ev.soc_target - slack - 1e-12 {
                unmet += 1;
            }
            if self.options.record_selections {
                let mut estimate = Vec::new();
                std::mem::swap(&mut estimate, &mut self.day_estimates[e]);
                self.selections[e].push(DailySelection {
                    arm: SuperArm::from_mask(&state.played_mask),
                    estimate,
                    candidates: (ev.t_arrive..=ev.t_depart).collect(),
                });
            }
            if self.strategy == Strategy::Amas {
                self.theta[e].update(&state.played_mask, &state.reward_trace)?;
                self.phi[e].update(&state.pv_mask, &state.pv_readings)?;
            }
        }
        let fairness = match self.strategy {
            Strategy::Uncontrolled => None,
            _ => fairness_index(&per_unit_costs(&costs, &energies)),
        };
        self.metrics.days.push(DayMetrics {
            day,
            mean_reward: mean_daily_reward(&rewards),
            total_cost: costs.iter().sum(),
            energy_kwh: energies.iter().sum(),
            current_violations: acc.current_violations,
            voltage_violations: acc.voltage_violations,
            fairness,
            unmet_evs: unmet,
            curtailments: acc.curtailments,
            max_mismatch_va: acc.max_mismatch_va,
            max_flood_rounds: acc.max_flood_rounds,
        });
        self.metrics.ev_cost.push(costs);
        self.metrics.ev_energy.push(energies);
        Ok(())
    }
}
