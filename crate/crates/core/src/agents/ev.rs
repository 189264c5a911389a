use serde::{Deserialize, Serialize};

use super::{ev_reward, Criticality, CriticalityRequest};
use crate::bandit::select_super_arm;
use crate::{Error, Result};

/// Static parameters of one EV and its daily connection window.
///
/// Instants are indices into the simulation day; the EV is plugged in
/// for every instant in `t_arrive..=t_depart`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvProfile {
    pub ev_id: usize,
    pub bus_id: usize,
    /// kWh.
    pub e_bat: f64,
    /// kW.
    pub p_max: f64,
    pub eta_chrg: f64,
    pub soc_start: f64,
    pub soc_target: f64,
    pub t_arrive: usize,
    pub t_depart: usize,
    /// Index of the household PV panel the EV reads, if any.
    pub pv_panel: Option<usize>,
}

impl EvProfile {
    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("ev {}: {msg}", self.ev_id)));
        if !(self.e_bat > 0.0 && self.p_max > 0.0) {
            return bad("battery capacity and charging power must be positive");
        }
        if !(self.eta_chrg > 0.0 && self.eta_chrg <= 1.0) {
            return bad("charging efficiency must lie in (0, 1]");
        }
        if !(0.0 <= self.soc_start && self.soc_start <= self.soc_target && self.soc_target <= 1.0) {
            return bad("need 0 ≤ soc_start ≤ soc_target ≤ 1");
        }
        if !(self.t_arrive < self.t_depart && self.t_depart < m) {
            return bad("need t_arrive < t_depart < m");
        }
        Ok(())
    }

    pub fn is_connected(&self, now: usize) -> bool {
        (self.t_arrive..=self.t_depart).contains(&now)
    }

    /// Energy one grid-charging instant stores in the battery, kWh.
    pub fn energy_per_instant(&self, delta_i_min: f64) -> f64 {
        self.p_max * self.eta_chrg * delta_i_min / 60.0
    }
}

/// Grid-charging instants still needed, re-planned at `now`.
///
/// ```text
/// k_f = ⌈ 60·E_bat·(SoC_f − SoC_s) / (Δi·P_max·η) − Σ φ_i / (P_max·η) ⌉ − k_p
/// ```
///
/// The PV sum runs over the whole connection window; `pv_w` holds watt per
/// instant (observed values for the past, estimates for the future). The
/// result is clamped to `[0, instants left including now]`.
pub fn required_instants(
    profile: &EvProfile,
    delta_i_min: f64,
    pv_w: &[f64],
    k_p: usize,
    now: usize,
) -> usize {
    let per_instant = profile.p_max * profile.eta_chrg;
    let energy_term = 60.0 * profile.e_bat * (profile.soc_target - profile.soc_start)
        / (delta_i_min * per_instant);
    let pv_kw: f64 = (profile.t_arrive..=profile.t_depart.min(pv_w.len().saturating_sub(1)))
        .map(|i| pv_w[i] / 1000.0)
        .sum();
    // guards against ⌈10.000000001⌉ = 11 from rounding
    let raw = (energy_term - pv_kw / per_instant - 1e-9).ceil() - k_p as f64;
    let left = (profile.t_depart + 1).saturating_sub(now.max(profile.t_arrive));
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(left)
    }
}

/// Mutable per-day state of an EV agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvState {
    pub soc: f64,
    pub k_p: usize,
    pub connected: bool,
    pub played_mask: Vec<bool>,
    pub reward_trace: Vec<f64>,
    /// θ̃ for the day.
    pub sampled_theta: Vec<f64>,
    /// φ̃ for the day, watt.
    pub sampled_phi: Vec<f64>,
    /// Instants with a PV sensor reading.
    pub pv_mask: Vec<bool>,
    pub pv_readings: Vec<f64>,
    /// PV power the battery actually took, watt.
    pub pv_absorbed: Vec<f64>,
    /// Requests received during the previous instant.
    pub pending: Vec<CriticalityRequest>,
    pub grid_energy_kwh: f64,
    pub cost: f64,
}

impl EvState {
    pub fn new(profile: &EvProfile, m: usize) -> Self {
        Self {
            soc: profile.soc_start,
            k_p: 0,
            connected: false,
            played_mask: vec![false; m],
            reward_trace: vec![0.0; m],
            sampled_theta: vec![0.0; m],
            sampled_phi: vec![0.0; m],
            pv_mask: vec![false; m],
            pv_readings: vec![0.0; m],
            pv_absorbed: vec![0.0; m],
            pending: Vec::new(),
            grid_energy_kwh: 0.0,
            cost: 0.0,
        }
    }

    /// Resets the day and installs the day's parameter samples.
    pub fn start_day(&mut self, profile: &EvProfile, theta: Vec<f64>, phi: Vec<f64>) {
        let m = self.played_mask.len();
        *self = Self::new(profile, m);
        self.sampled_theta = theta;
        self.sampled_phi = phi;
    }

    /// PV profile used by the `k_f` rule at `now`.
    pub fn pv_plan(&self, now: usize) -> Vec<f64> {
        (0..self.pv_absorbed.len())
            .map(|i| {
                if i < now {
                    self.pv_absorbed[i]
                } else {
                    self.sampled_phi[i].max(0.0)
                }
            })
            .collect()
    }

    pub fn needs_energy(&self, profile: &EvProfile) -> bool {
        self.soc < profile.soc_target
    }

    /// Applies one instant of charging and PV self-consumption; returns the
    /// PV power actually absorbed (watt).
    pub fn apply_energy(
        &mut self,
        profile: &EvProfile,
        now: usize,
        grid_kw: f64,
        pv_available_w: f64,
        delta_i_min: f64,
    ) -> f64 {
        let hours = delta_i_min / 60.0;
        self.soc += grid_kw * profile.eta_chrg * hours / profile.e_bat;
        let room_kwh = ((profile.soc_target - self.soc) * profile.e_bat).max(0.0);
        let pv_kw = (pv_available_w.max(0.0) / 1000.0).min(room_kwh / hours);
        self.soc += pv_kw * hours / profile.e_bat;
        self.pv_absorbed[now] = pv_kw * 1000.0;
        self.grid_energy_kwh += grid_kw * hours;
        pv_kw * 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChargeDecision {
    pub charge: bool,
    pub k_f: usize,
    /// `now` belongs to the re-planned super arm.
    pub planned: bool,
    /// A `+1` request named this EV.
    pub curtailed: bool,
    /// A `-1` request named this EV.
    pub boosted: bool,
}

impl ChargeDecision {
    pub fn power_kw(&self, profile: &EvProfile) -> f64 {
        if self.charge {
            profile.p_max
        } else {
            0.0
        }
    }
}

/// Decision stage of the EV agent at instant `now`.
///
/// Re-plans `k_f` and the top-`k_f` remaining instants under the day's
/// sampled θ̃. Pending `+1` requests naming the EV suppress charging; pending
/// `-1` requests naming it force charging while energy is still needed.
pub fn ev_decide(
    profile: &EvProfile,
    state: &EvState,
    now: usize,
    delta_i_min: f64,
) -> Result<ChargeDecision> {
    let mut decision = ChargeDecision {
        charge: false,
        k_f: 0,
        planned: false,
        curtailed: false,
        boosted: false,
    };
    if !profile.is_connected(now) {
        return Ok(decision);
    }
    let k_f = if state.needs_energy(profile) {
        required_instants(profile, delta_i_min, &state.pv_plan(now), state.k_p, now)
    } else {
        0
    };
    decision.k_f = k_f;
    if k_f == 0 {
        return Ok(decision);
    }
    let candidates: Vec<usize> = (now..=profile.t_depart)
        .filter(|&i| !state.played_mask[i])
        .collect();
    let arm = select_super_arm(&state.sampled_theta, &candidates, k_f)?;
    decision.planned = arm.contains(now);
    let named = |sign: f64| {
        state
            .pending
            .iter()
            .any(|r| r.criticality.value() * sign > 0.0 && r.targets(profile.ev_id))
    };
    decision.curtailed = named(1.0);
    decision.boosted = named(-1.0);
    decision.charge = !decision.curtailed && (decision.planned || decision.boosted);
    Ok(decision)
}

/// Perception stage: records reward and PV reading for instant `now`.
///
/// Rewards exist only where the EV charged; PV is recorded whenever the EV
/// is connected.
pub fn ev_record(
    profile: &EvProfile,
    state: &mut EvState,
    now: usize,
    charged: bool,
    cost: Criticality,
    received: &[Criticality],
    pv_reading_w: f64,
) {
    if !profile.is_connected(now) {
        return;
    }
    if charged {
        state.played_mask[now] = true;
        state.k_p += 1;
        state.reward_trace[now] = ev_reward(cost, received);
    }
    state.pv_mask[now] = true;
    state.pv_readings[now] = pv_reading_w;
}
