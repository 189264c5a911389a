use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::profile::{ingest_profile, ProfileKind};
use crate::agents::EvProfile;
use crate::grid::{build_replicated_feeder, DeviceKind, FeederSpec};
use crate::{Error, NetworkTopology, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Decision instants per day (`m`).
    pub instants_per_day: usize,
    /// Clock hour at which instant 0 of a simulation day starts. Overnight
    /// connection windows must fit inside one simulation day.
    pub day_start_hour: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            instants_per_day: 96,
            day_start_hour: 12.0,
        }
    }
}

/// Normal distribution truncated to `[min, max]` by rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl TruncatedNormal {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.sd >= 0.0 && self.min <= self.max && self.mean.is_finite()) {
            return Err(Error::Config(format!("{name}: need sd ≥ 0 and min ≤ max")));
        }
        if self.sd == 0.0 && !(self.min..=self.max).contains(&self.mean) {
            return Err(Error::Config(format!(
                "{name}: degenerate mean outside [min, max]"
            )));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        if self.sd == 0.0 {
            return Some(self.mean);
        }
        let normal = Normal::new(self.mean, self.sd).ok()?;
        (0..10_000)
            .map(|_| normal.sample(rng))
            .find(|x| (self.min..=self.max).contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetConfig {
    /// Number of EVs; defaults to one per charge point.
    pub size: Option<usize>,
    pub e_bat_kwh: f64,
    pub p_max_kw: f64,
    pub eta_chrg: f64,
    pub soc_target: f64,
    pub soc_start: TruncatedNormal,
    /// Clock hour of plug-in.
    pub arrival_hour: TruncatedNormal,
    /// Clock hour of plug-out.
    pub departure_hour: TruncatedNormal,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            size: None,
            e_bat_kwh: 52.0,
            p_max_kw: 7.0,
            eta_chrg: 0.95,
            soc_target: 0.8,
            soc_start: TruncatedNormal {
                mean: 0.5,
                sd: 0.1,
                min: 0.3,
                max: 0.7,
            },
            arrival_hour: TruncatedNormal {
                mean: 18.0,
                sd: 1.5,
                min: 14.0,
                max: 22.0,
            },
            departure_hour: TruncatedNormal {
                mean: 7.5,
                sd: 1.0,
                min: 5.0,
                max: 10.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvConfig {
    pub area_m2: f64,
    pub efficiency: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self {
            area_m2: 20.0,
            efficiency: 0.18,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrradianceConfig {
    /// Clear-sky peak, W/m².
    pub peak_w_m2: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    /// Each day is scaled by `1 − variability·U(0, 1)`.
    pub daily_variability: f64,
    /// Clock-indexed `instant,value` CSV replacing the clear-sky curve.
    pub profile: Option<PathBuf>,
}

impl Default for IrradianceConfig {
    fn default() -> Self {
        Self {
            peak_w_m2: 800.0,
            sunrise_hour: 6.0,
            sunset_hour: 20.0,
            daily_variability: 0.3,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriceConfig {
    /// Time-of-use steps as `[start_hour, price]`, price per kWh.
    pub tou: Vec<[f64; 2]>,
    /// Clock-indexed `instant,value` CSV replacing the steps.
    pub profile: Option<PathBuf>,
    /// Normalizing price; defaults to the profile maximum.
    pub c_max: Option<f64>,
}

impl Default for PriceConfig {
    fn default() -> Self {
        Self {
            tou: vec![
                [0.0, 0.10],
                [7.0, 0.16],
                [17.0, 0.24],
                [21.0, 0.16],
                [23.0, 0.10],
            ],
            profile: None,
            c_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HouseholdConfig {
    /// Flat demand per household, watt.
    pub base_load_w: f64,
    /// Clock-indexed per-household demand CSV, watt.
    pub profile: Option<PathBuf>,
}

impl Default for HouseholdConfig {
    fn default() -> Self {
        Self {
            base_load_w: 500.0,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub time: TimeConfig,
    pub feeder: FeederSpec,
    pub fleet: FleetConfig,
    pub pv: PvConfig,
    pub irradiance: IrradianceConfig,
    pub price: PriceConfig,
    pub household: HouseholdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvPanel {
    pub bus: usize,
    pub area_m2: f64,
    pub efficiency: f64,
}

/// Everything a run needs besides the strategy.
///
/// All per-instant series are indexed by simulation instant, i.e. shifted so
/// that index 0 falls on `day_start_hour`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub fleet: Vec<EvProfile>,
    pub pv_panels: Vec<PvPanel>,
    /// Normalized tariff `c(i) / c_max`.
    pub price: Vec<f64>,
    /// `c_max`, currency per kWh.
    pub price_scale: f64,
    /// Clear-sky irradiance, W/m².
    pub irradiance: Vec<f64>,
    pub daily_variability: f64,
    /// Demand per bus per instant, watt.
    pub household_load: Vec<Vec<f64>>,
    pub m: usize,
    /// Minutes per instant.
    pub delta_i: f64,
    pub day_start_instant: usize,
    pub seed: u64,
}

impl Scenario {
    /// Tariff at instant `i` in currency per kWh.
    pub fn tariff(&self, i: usize) -> f64 {
        self.price[i] * self.price_scale
    }

    /// Cloudiness factor of `day` in `[1 − variability, 1]`.
    pub fn irradiance_factor(&self, day: usize) -> f64 {
        if self.daily_variability == 0.0 {
            return 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0x1_0000 + day as u64);
        1.0 - self.daily_variability * rng.random::<f64>()
    }

    /// Output of a PV panel, watt.
    pub fn pv_output(&self, panel: usize, day: usize, i: usize) -> f64 {
        let p = &self.pv_panels[panel];
        p.area_m2 * p.efficiency * self.irradiance[i] * self.irradiance_factor(day)
    }

    /// Clear-sky peak output of the largest panel, watt.
    pub fn rated_pv_power(&self) -> f64 {
        let peak = self.irradiance.iter().copied().fold(0.0, f64::max);
        self.pv_panels
            .iter()
            .map(|p| p.area_m2 * p.efficiency * peak)
            .fold(0.0, f64::max)
    }

    pub fn hours_per_instant(&self) -> f64 {
        self.delta_i / 60.0
    }
}

fn rotate(clock: Vec<f64>, start: usize) -> Vec<f64> {
    let m = clock.len();
    (0..m).map(|i| clock[(i + start) % m]).collect()
}

fn local_instant(hour: f64, day_start_hour: f64, delta_i: f64) -> usize {
    let since = (hour - day_start_hour).rem_euclid(24.0);
    (since * 60.0 / delta_i).floor() as usize
}

/// Builds a scenario; identical `(config, seed)` give identical scenarios.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let m = config.time.instants_per_day;
    if m == 0 || 1440 % m != 0 {
        return Err(Error::Config(format!(
            "instants_per_day = {m} does not divide 1440 minutes"
        )));
    }
    let delta_i = 1440.0 / m as f64;
    if !(0.0..24.0).contains(&config.time.day_start_hour) {
        return Err(Error::Config("day_start_hour must lie in [0, 24)".into()));
    }
    let day_start_instant = local_instant(config.time.day_start_hour, 0.0, delta_i);
    let hour_of = |clock_i: usize| clock_i as f64 * delta_i / 60.0;

    let topology = build_replicated_feeder::<f64>(&config.feeder)?;

    let (price_clock, default_scale) = match &config.price.profile {
        Some(path) => {
            let p = ingest_profile(path, ProfileKind::Price, m)?;
            let raw: Vec<f64> = p.values.iter().map(|v| v * p.scale).collect();
            (raw, p.scale)
        }
        None => {
            if config.price.tou.is_empty() {
                return Err(Error::Config("price.tou needs at least one step".into()));
            }
            let mut steps = config.price.tou.clone();
            steps.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let raw: Vec<f64> = (0..m)
                .map(|i| {
                    let h = hour_of(i);
                    steps
                        .iter()
                        .rev()
                        .find(|s| s[0] <= h)
                        .unwrap_or(steps.last().expect("non-empty"))[1]
                })
                .collect();
            let max = raw.iter().copied().fold(0.0, f64::max);
            (raw, max)
        }
    };
    if price_clock.iter().any(|&c| c < 0.0) {
        return Err(Error::Config("prices must be non-negative".into()));
    }
    let price_scale = config.price.c_max.unwrap_or(default_scale);
    if price_scale <= 0.0 || price_clock.iter().any(|&c| c > price_scale * (1.0 + 1e-12)) {
        return Err(Error::Config(
            "c_max must be positive and bound every price".into(),
        ));
    }
    let price = rotate(
        price_clock.iter().map(|c| c / price_scale).collect(),
        day_start_instant,
    );

    let irr = &config.irradiance;
    let irradiance_clock = match &irr.profile {
        Some(path) => ingest_profile(path, ProfileKind::Irradiance, m)?.values,
        None => {
            if irr.sunrise_hour >= irr.sunset_hour || irr.peak_w_m2 < 0.0 {
                return Err(Error::Config(
                    "irradiance needs sunrise < sunset and peak ≥ 0".into(),
                ));
            }
            (0..m)
                .map(|i| {
                    let h = hour_of(i) + delta_i / 120.0;
                    if h <= irr.sunrise_hour || h >= irr.sunset_hour {
                        0.0
                    } else {
                        let x = (h - irr.sunrise_hour) / (irr.sunset_hour - irr.sunrise_hour);
                        irr.peak_w_m2 * (PI * x).sin()
                    }
                })
                .collect()
        }
    };
    if !(0.0..=1.0).contains(&irr.daily_variability) {
        return Err(Error::Config(
            "irradiance.daily_variability must lie in [0, 1]".into(),
        ));
    }
    let irradiance = rotate(irradiance_clock, day_start_instant);

    let per_household = match &config.household.profile {
        Some(path) => rotate(
            ingest_profile(path, ProfileKind::Load, m)?.values,
            day_start_instant,
        ),
        None => vec![config.household.base_load_w; m],
    };
    let household_load: Vec<Vec<f64>> = topology
        .buses()
        .iter()
        .map(|bus| {
            let homes = bus
                .devices
                .iter()
                .filter(|&&d| topology.devices()[d].kind == DeviceKind::Household)
                .count() as f64;
            per_household.iter().map(|w| w * homes).collect()
        })
        .collect();

    let pv = &config.pv;
    if pv.area_m2 < 0.0 || !(0.0..=1.0).contains(&pv.efficiency) {
        return Err(Error::Config(
            "pv needs area ≥ 0 and efficiency in [0, 1]".into(),
        ));
    }
    let pv_panels: Vec<PvPanel> = topology
        .devices_of_kind(DeviceKind::Pv)
        .map(|d| PvPanel {
            bus: d.bus,
            area_m2: pv.area_m2,
            efficiency: pv.efficiency,
        })
        .collect();

    let fleet_cfg = &config.fleet;
    let charge_points: Vec<usize> = topology
        .devices_of_kind(DeviceKind::ChargePoint)
        .map(|d| d.bus)
        .collect();
    let size = fleet_cfg.size.unwrap_or(charge_points.len());
    if size > charge_points.len() {
        return Err(Error::Config(format!(
            "fleet of {size} EVs exceeds the {} charge points of the feeder",
            charge_points.len()
        )));
    }
    fleet_cfg.soc_start.validate("fleet.soc_start")?;
    fleet_cfg.arrival_hour.validate("fleet.arrival_hour")?;
    fleet_cfg.departure_hour.validate("fleet.departure_hour")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fleet = Vec::with_capacity(size);
    for (ev_id, &bus_id) in charge_points.iter().take(size).enumerate() {
        let window = (0..1000).find_map(|_| {
            let a = fleet_cfg.arrival_hour.sample(&mut rng)?;
            let d = fleet_cfg.departure_hour.sample(&mut rng)?;
            let t_arrive = local_instant(a, config.time.day_start_hour, delta_i);
            let t_depart = local_instant(d, config.time.day_start_hour, delta_i).checked_sub(1)?;
            (t_arrive < t_depart).then_some((t_arrive, t_depart))
        });
        let Some((t_arrive, t_depart)) = window else {
            return Err(Error::Infeasible(
                "arrival/departure distributions give no connection window inside one simulation day"
                    .into(),
            ));
        };
        let soc_start = fleet_cfg
            .soc_start
            .sample(&mut rng)
            .ok_or_else(|| Error::Infeasible("fleet.soc_start cannot be sampled".into()))?
            .min(fleet_cfg.soc_target);
        // EVs share households with PV panels in device order.
        let pv_panel = (ev_id < pv_panels.len() && pv_panels[ev_id].bus == bus_id).then_some(ev_id);
        let profile = EvProfile {
            ev_id,
            bus_id,
            e_bat: fleet_cfg.e_bat_kwh,
            p_max: fleet_cfg.p_max_kw,
            eta_chrg: fleet_cfg.eta_chrg,
            soc_start,
            soc_target: fleet_cfg.soc_target,
            t_arrive,
            t_depart,
            pv_panel,
        };
        profile.validate(m)?;
        fleet.push(profile);
    }

    Ok(Scenario {
        topology,
        fleet,
        pv_panels,
        price,
        price_scale,
        irradiance,
        daily_variability: irr.daily_variability,
        household_load,
        m,
        delta_i,
        day_start_instant,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig::default();
        let a = serde_json::to_string(&generate_scenario(&cfg, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_scenario(&cfg, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_scenario(&cfg, 10).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_fleet_uses_reference_ev_parameters() {
        let s = generate_scenario(&ScenarioConfig::default(), 1).unwrap();
        assert_eq!(s.fleet.len(), 55);
        for ev in &s.fleet {
            assert_eq!(ev.e_bat, 52.0);
            assert_eq!(ev.p_max, 7.0);
            assert_eq!(ev.eta_chrg, 0.95);
            assert_eq!(ev.soc_target, 0.8);
            assert!(ev.t_arrive < ev.t_depart && ev.t_depart < s.m);
            assert!(ev.pv_panel.is_some());
        }
    }

    #[test]
    fn zero_evs_is_valid() {
        let mut cfg = ScenarioConfig::default();
        cfg.fleet.size = Some(0);
        let s = generate_scenario(&cfg, 1).unwrap();
        assert!(s.fleet.is_empty());
    }

    #[test]
    fn departure_before_arrival_is_infeasible() {
        let mut cfg = ScenarioConfig::default();
        cfg.time.day_start_hour = 0.0;
        cfg.fleet.arrival_hour = TruncatedNormal {
            mean: 18.0,
            sd: 0.5,
            min: 17.0,
            max: 19.0,
        };
        cfg.fleet.departure_hour = TruncatedNormal {
            mean: 8.0,
            sd: 0.5,
            min: 7.0,
            max: 9.0,
        };
        assert!(matches!(
            generate_scenario(&cfg, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn profiles_are_rotated_to_day_start() {
        let s = generate_scenario(&ScenarioConfig::default(), 1).unwrap();
        assert_eq!(s.day_start_instant, 48);
        // noon is shoulder price, midnight (instant 48) is off-peak
        assert!((s.tariff(0) - 0.16).abs() < 1e-12);
        assert!((s.tariff(48) - 0.10).abs() < 1e-12);
        assert_eq!(s.price.iter().copied().fold(0.0, f64::max), 1.0);
        assert!(s.irradiance[0] > 700.0);
        assert_eq!(s.irradiance[48], 0.0);
    }

    #[test]
    fn irradiance_factor_is_deterministic_and_bounded() {
        let s = generate_scenario(&ScenarioConfig::default(), 5).unwrap();
        for day in 0..50 {
            let f = s.irradiance_factor(day);
            assert_eq!(f, s.irradiance_factor(day));
            assert!((0.7..=1.0).contains(&f));
        }
    }

    #[test]
    fn rejects_bad_time_grid_and_oversized_fleet() {
        let mut cfg = ScenarioConfig::default();
        cfg.time.instants_per_day = 7;
        assert!(generate_scenario(&cfg, 1).is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.fleet.size = Some(56);
        assert!(generate_scenario(&cfg, 1).is_err());
    }
}
