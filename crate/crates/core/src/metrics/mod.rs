//! Evaluation quantities and the comparison strategies.

mod strategies;

pub use strategies::{
    centralized_oracle, uncontrolled_action, OracleMode, OracleSchedule, EXHAUSTIVE_MAX_EVS,
};

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// `Σ c(i)·P(i)·Δi` over grid-drawn power; `delta_i_h` in hours.
pub fn daily_cost<T: Scalar>(prices: &[T], powers: &[T], delta_i_h: T) -> T {
    prices
        .iter()
        .zip(powers)
        .fold(T::zero(), |acc, (&c, &p)| acc + c * p * delta_i_h)
}

/// `1 / (1 + (σ/μ)²)` with the population standard deviation.
///
/// Returns `None` for an empty set or a negative mean; an all-zero set is
/// perfectly fair.
pub fn fairness_index<T: Scalar>(per_unit_costs: &[T]) -> Option<T> {
    if per_unit_costs.is_empty() {
        return None;
    }
    let n = T::from_usize(per_unit_costs.len())?;
    let mean = per_unit_costs.iter().fold(T::zero(), |a, &x| a + x) / n;
    if mean < T::zero() {
        return None;
    }
    let var = per_unit_costs
        .iter()
        .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean))
        / n;
    if var == T::zero() {
        return Some(T::one());
    }
    if mean == T::zero() {
        return None;
    }
    let cv = var.sqrt() / mean;
    Some(T::one() / (T::one() + cv * cv))
}

/// Mean over EVs of each EV's mean recorded reward; `None` if nobody
/// recorded a reward.
pub fn mean_daily_reward(rewards_per_ev: &[Vec<f64>]) -> Option<f64> {
    let means: Vec<f64> = rewards_per_ev
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
}

/// Electrical state observed at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstantTrace {
    pub day: usize,
    pub instant: usize,
    pub line_currents: Vec<f64>,
    pub line_ratings: Vec<f64>,
    pub bus_voltages: Vec<f64>,
    pub voltage_limits: Vec<(f64, f64)>,
    pub converged: bool,
    /// Max nodal power mismatch in VA; `None` when the sweep failed.
    pub mismatch_va: Option<f64>,
    pub ev_power_kw: Vec<f64>,
    pub rewards: Vec<Option<f64>>,
    /// EVs named by a delivered `+1` request; they abstain next instant.
    pub curtail_targets: Vec<usize>,
    pub originated_requests: usize,
    pub flood_rounds: usize,
    pub messages: usize,
}

impl InstantTrace {
    pub fn current_violation(&self) -> bool {
        !self.converged
            || self
                .line_currents
                .iter()
                .zip(&self.line_ratings)
                .any(|(i, r)| i > r)
    }

    pub fn voltage_violation(&self) -> bool {
        !self.converged
            || self
                .bus_voltages
                .iter()
                .zip(&self.voltage_limits)
                .any(|(v, (lo, hi))| v < lo || v > hi)
    }
}

/// Instants with any current violation and with any voltage violation.
/// A failed sweep counts as both.
pub fn count_violations(traces: &[InstantTrace]) -> (usize, usize) {
    traces.iter().fold((0, 0), |(c, v), t| {
        (
            c + usize::from(t.current_violation()),
            v + usize::from(t.voltage_violation()),
        )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: usize,
    pub mean_reward: Option<f64>,
    pub total_cost: f64,
    pub energy_kwh: f64,
    pub current_violations: usize,
    pub voltage_violations: usize,
    pub fairness: Option<f64>,
    /// EVs that left more than one instant's energy short of their target.
    pub unmet_evs: usize,
    pub curtailments: usize,
    pub max_mismatch_va: f64,
    pub max_flood_rounds: usize,
}

/// Per-day and per-EV results of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationMetrics {
    pub days: Vec<DayMetrics>,
    /// `[day][ev]` grid charging cost.
    pub ev_cost: Vec<Vec<f64>>,
    /// `[day][ev]` grid energy drawn, kWh.
    pub ev_energy: Vec<Vec<f64>>,
}

impl SimulationMetrics {
    pub fn total_cost(&self, days: std::ops::Range<usize>) -> f64 {
        self.days[days].iter().map(|d| d.total_cost).sum()
    }

    pub fn violations(&self, days: std::ops::Range<usize>) -> (usize, usize) {
        self.days[days].iter().fold((0, 0), |(c, v), d| {
            (c + d.current_violations, v + d.voltage_violations)
        })
    }

    /// Fairness of per-EV per-unit costs aggregated over `days`; EVs that
    /// drew no energy are left out.
    pub fn fairness_over(&self, days: std::ops::Range<usize>) -> Option<f64> {
        let evs = self.ev_cost.first().map_or(0, Vec::len);
        let per_unit: Vec<f64> = (0..evs)
            .filter_map(|e| {
                let cost: f64 = self.ev_cost[days.clone()].iter().map(|d| d[e]).sum();
                let energy: f64 = self.ev_energy[days.clone()].iter().map(|d| d[e]).sum();
                (energy > 0.0).then(|| cost / energy)
            })
            .collect();
        fairness_index(&per_unit)
    }

    /// Mean of the daily mean rewards over `days`, skipping days without one.
    pub fn mean_reward(&self, days: std::ops::Range<usize>) -> Option<f64> {
        let r: Vec<f64> = self.days[days]
            .iter()
            .filter_map(|d| d.mean_reward)
            .collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }
}

/// Per-unit charging cost of every EV with positive energy on one day.
pub fn per_unit_costs(costs: &[f64], energies: &[f64]) -> Vec<f64> {
    costs
        .iter()
        .zip(energies)
        .filter(|(_, &e)| e > 0.0)
        .map(|(c, e)| c / e)
        .collect()
}
