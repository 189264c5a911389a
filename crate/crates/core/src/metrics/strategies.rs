use serde::{Deserialize, Serialize};

use crate::agents::{required_instants, EvProfile, EvState};
use crate::grid::solve_power_flow;
use crate::sim::Scenario;
use crate::{Error, Result};

/// Plug-and-charge: full power from arrival until the SoC target is reached.
/// Prices and requests are never consulted.
pub fn uncontrolled_action(profile: &EvProfile, state: &EvState, now: usize) -> bool {
    profile.is_connected(now) && state.needs_energy(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Branch-and-bound over every per-EV instant subset; small fleets only.
    Exhaustive,
    /// Least flexible EV first, each on its cheapest feasible instants.
    #[default]
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSchedule {
    /// `[ev][instant]` grid-charging plan.
    pub schedules: Vec<Vec<bool>>,
    pub cost: f64,
    /// Greedy only: instants assigned although no feasible one was left.
    pub forced_assignments: usize,
}

pub const EXHAUSTIVE_MAX_EVS: usize = 12;
const EXHAUSTIVE_MAX_SUBSETS: usize = 200_000;
const EXHAUSTIVE_MAX_NODES: usize = 20_000_000;

struct Problem<'a> {
    scenario: &'a Scenario,
    slack_pu: f64,
    /// `[instant][bus]` load without grid charging, watt.
    base: Vec<Vec<f64>>,
    needs: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(scenario: &'a Scenario, day: usize, slack_pu: f64) -> Self {
        let m = scenario.m;
        let buses = scenario.topology.buses().len();
        let mut base: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..buses).map(|b| scenario.household_load[b][i]).collect())
            .collect();
        for (p, panel) in scenario.pv_panels.iter().enumerate() {
            for (i, row) in base.iter_mut().enumerate() {
                row[panel.bus] -= scenario.pv_output(p, day, i);
            }
        }
        let mut needs = Vec::with_capacity(scenario.fleet.len());
        for ev in &scenario.fleet {
            let pv: Vec<f64> = (0..m)
                .map(|i| ev.pv_panel.map_or(0.0, |p| scenario.pv_output(p, day, i)))
                .collect();
            // PV of a connected EV is taken by its battery, not exported.
            for i in ev.t_arrive..=ev.t_depart {
                base[i][ev.bus_id] += pv[i];
            }
            needs.push(required_instants(ev, scenario.delta_i, &pv, 0, ev.t_arrive));
        }
        Self {
            scenario,
            slack_pu,
            base,
            needs,
        }
    }

    fn instant_cost(&self, ev: &EvProfile, i: usize) -> f64 {
        self.scenario.tariff(i) * ev.p_max * self.scenario.hours_per_instant()
    }

    fn feasible(&self, i: usize, extra: &[f64]) -> Result<bool> {
        let loads: Vec<f64> = self.base[i].iter().zip(extra).map(|(b, e)| b + e).collect();
        let net = &self.scenario.topology;
        let sol = solve_power_flow(net, &loads, self.slack_pu)?;
        if !sol.converged {
            return Ok(false);
        }
        let lines_ok = sol
            .line_currents
            .iter()
            .zip(net.lines())
            .all(|(&c, l)| c <= l.i_rated);
        let buses_ok = sol
            .bus_voltages
            .iter()
            .zip(net.buses())
            .all(|(&v, b)| v >= b.v_min && v <= b.v_max);
        Ok(lines_ok && buses_ok)
    }
}

/// Cost-minimal charging plan for one day with perfect PV knowledge.
///
/// Each EV gets the number of grid instants its true PV production leaves
/// to cover. A plan is feasible when every instant carrying grid charging
/// keeps all lines and buses within limits.
pub fn centralized_oracle(
    scenario: &Scenario,
    day: usize,
    mode: OracleMode,
    slack_pu: f64,
) -> Result<OracleSchedule> {
    let problem = Problem::new(scenario, day, slack_pu);
    match mode {
        OracleMode::Greedy => greedy(&problem),
        OracleMode::Exhaustive => exhaustive(&problem),
    }
}

fn greedy(problem: &Problem) -> Result<OracleSchedule> {
    let sc = problem.scenario;
    let buses = sc.topology.buses().len();
    let mut extra = vec![vec![0.0; buses]; sc.m];
    let mut schedules = vec![vec![false; sc.m]; sc.fleet.len()];
    let mut cost = 0.0;
    let mut forced = 0;

    let mut order: Vec<usize> = (0..sc.fleet.len()).collect();
    order.sort_by_key(|&e| {
        let ev = &sc.fleet[e];
        (ev.t_depart - ev.t_arrive + 1 - problem.needs[e], e)
    });
    for e in order {
        let ev = &sc.fleet[e];
        let k = problem.needs[e];
        let mut instants: Vec<usize> = (ev.t_arrive..=ev.t_depart).collect();
        instants.sort_by(|&a, &b| sc.price[a].total_cmp(&sc.price[b]).then(a.cmp(&b)));
        let mut chosen = 0;
        for &i in &instants {
            if chosen == k {
                break;
            }
            extra[i][ev.bus_id] += ev.p_max * 1000.0;
            if problem.feasible(i, &extra[i])? {
                schedules[e][i] = true;
                chosen += 1;
            } else {
                extra[i][ev.bus_id] -= ev.p_max * 1000.0;
            }
        }
        for &i in &instants {
            if chosen == k {
                break;
            }
            if !schedules[e][i] {
                schedules[e][i] = true;
                extra[i][ev.bus_id] += ev.p_max * 1000.0;
                chosen += 1;
                forced += 1;
            }
        }
        cost += (0..sc.m)
            .filter(|&i| schedules[e][i])
            .map(|i| problem.instant_cost(ev, i))
            .sum::<f64>();
    }
    Ok(OracleSchedule {
        schedules,
        cost,
        forced_assignments: forced,
    })
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..items.len() {
            if items.len() - j < k - cur.len() {
                break;
            }
            cur.push(items[j]);
            rec(items, k, j + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    /// Per EV: candidate subsets with their cost, ascending.
    options: Vec<Vec<(f64, Vec<usize>)>>,
    /// Cheapest completion from EV `e` onwards.
    min_rest: Vec<f64>,
    extra: Vec<Vec<f64>>,
    current: Vec<usize>,
    best_cost: f64,
    best: Option<Vec<usize>>,
    nodes: usize,
}

impl Search<'_, '_> {
    fn dfs(&mut self, e: usize, cost: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > EXHAUSTIVE_MAX_NODES {
            return Err(Error::OracleTooLarge(format!(
                "more than {EXHAUSTIVE_MAX_NODES} search nodes"
            )));
        }
        if e == self.options.len() {
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best = Some(self.current.clone());
            }
            return Ok(());
        }
        let ev = &self.problem.scenario.fleet[e];
        let power = ev.p_max * 1000.0;
        for idx in 0..self.options[e].len() {
            let option_cost = self.options[e][idx].0;
            if cost + option_cost + self.min_rest[e + 1] >= self.best_cost - 1e-12 {
                break;
            }
            let instants = self.options[e][idx].1.clone();
            for &i in &instants {
                self.extra[i][ev.bus_id] += power;
            }
            let mut ok = true;
            for &i in &instants {
                if !self.problem.feasible(i, &self.extra[i])? {
                    ok = false;
                    break;
                }
            }
            if ok {
                self.current.push(idx);
                self.dfs(e + 1, cost + option_cost)?;
                self.current.pop();
            }
            for &i in &instants {
                self.extra[i][ev.bus_id] -= power;
            }
        }
        Ok(())
    }
}

fn exhaustive(problem: &Problem) -> Result<OracleSchedule> {
    let sc = problem.scenario;
    if sc.fleet.len() > EXHAUSTIVE_MAX_EVS {
        return Err(Error::OracleTooLarge(format!(
            "{} EVs, exhaustive mode handles at most {EXHAUSTIVE_MAX_EVS}",
            sc.fleet.len()
        )));
    }
    let mut options = Vec::with_capacity(sc.fleet.len());
    for (e, ev) in sc.fleet.iter().enumerate() {
        let window: Vec<usize> = (ev.t_arrive..=ev.t_depart).collect();
        let k = problem.needs[e];
        if binomial(window.len(), k) > EXHAUSTIVE_MAX_SUBSETS as f64 {
            return Err(Error::OracleTooLarge(format!(
                "ev {e} has more than {EXHAUSTIVE_MAX_SUBSETS} instant subsets"
            )));
        }
        let mut subsets: Vec<(f64, Vec<usize>)> = combinations(&window, k)
            .into_iter()
            .map(|s| (s.iter().map(|&i| problem.instant_cost(ev, i)).sum(), s))
            .collect();
        subsets.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        options.push(subsets);
    }
    let mut min_rest = vec![0.0; options.len() + 1];
    for e in (0..options.len()).rev() {
        min_rest[e] = min_rest[e + 1] + options[e].first().map_or(0.0, |o| o.0);
    }
    let mut search = Search {
        problem,
        options,
        min_rest,
        extra: vec![vec![0.0; sc.topology.buses().len()]; sc.m],
        current: Vec::new(),
        best_cost: f64::INFINITY,
        best: None,
        nodes: 0,
    };
    search.dfs(0, 0.0)?;
    let best = search.best.ok_or_else(|| {
        Error::Infeasible("no charging plan keeps the network within limits".into())
    })?;
    let mut schedules = vec![vec![false; sc.m]; sc.fleet.len()];
    for (e, &idx) in best.iter().enumerate() {
        for &i in &search.options[e][idx].1 {
            schedules[e][i] = true;
        }
    }
    Ok(OracleSchedule {
        schedules,
        cost: search.best_cost,
        forced_assignments: 0,
    })
}
