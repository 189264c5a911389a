//! Run configuration in TOML.
//!
//! ```toml
//! strategy = "amas"
//! days = 60
//! seed = 7
//!
//! [feeder]
//! buses_per_feeder = 11
//!
//! [fleet]
//! size = 55
//!
//! [bandit]
//! alpha = 0.5
//! ```
//!
//! Every section and key is optional; unknown keys are rejected. Profile
//! paths are resolved relative to the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::UpdateRule;
use crate::grid::FeederSpec;
use crate::metrics::OracleMode;
use crate::sim::{
    EngineOptions, FleetConfig, HouseholdConfig, IrradianceConfig, PriceConfig, PvConfig,
    ScenarioConfig, Strategy, TimeConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    pub alpha: f64,
    /// Watt; defaults to 10 % of the rated PV power.
    pub beta: Option<f64>,
    pub update_rule: UpdateRule,
    pub target_fraction: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        let e = EngineOptions::default();
        Self {
            alpha: e.alpha,
            beta: e.beta,
            update_rule: e.update_rule,
            target_fraction: e.target_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub mode: OracleMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub days: usize,
    pub seed: u64,
    pub slack_pu: f64,
    pub output_dir: PathBuf,
    pub time: TimeConfig,
    pub feeder: FeederSpec,
    pub fleet: FleetConfig,
    pub pv: PvConfig,
    pub irradiance: IrradianceConfig,
    pub price: PriceConfig,
    pub household: HouseholdConfig,
    pub bandit: BanditConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Amas,
            days: 60,
            seed: 1,
            slack_pu: 1.0,
            output_dir: PathBuf::from("out"),
            time: TimeConfig::default(),
            feeder: FeederSpec::default(),
            fleet: FleetConfig::default(),
            pv: PvConfig::default(),
            irradiance: IrradianceConfig::default(),
            price: PriceConfig::default(),
            household: HouseholdConfig::default(),
            bandit: BanditConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            time: self.time.clone(),
            feeder: self.feeder.clone(),
            fleet: self.fleet.clone(),
            pv: self.pv.clone(),
            irradiance: self.irradiance.clone(),
            price: self.price.clone(),
            household: self.household.clone(),
        }
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            alpha: self.bandit.alpha,
            beta: self.bandit.beta,
            update_rule: self.bandit.update_rule,
            target_fraction: self.bandit.target_fraction,
            slack_pu: self.slack_pu,
            oracle_mode: self.oracle.mode,
            ..EngineOptions::default()
        }
    }

    /// EVs the scenario will contain.
    pub fn fleet_size(&self) -> usize {
        let f = &self.feeder;
        self.fleet
            .size
            .unwrap_or(f.sub_districts * f.buses_per_feeder * f.charge_points_per_bus)
    }

    /// Checks everything that can be checked without building the scenario.
    pub fn validate(&self) -> Result<()> {
        let b = &self.bandit;
        if !(b.alpha >= 0.0 && b.alpha.is_finite()) {
            return Err(Error::Config(
                "bandit.alpha must be a finite value ≥ 0".into(),
            ));
        }
        if matches!(b.beta, Some(x) if !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Config(
                "bandit.beta must be a finite value ≥ 0".into(),
            ));
        }
        if !(b.target_fraction > 0.0 && b.target_fraction <= 1.0) {
            return Err(Error::Config(
                "bandit.target_fraction must lie in (0, 1]".into(),
            ));
        }
        if !(self.slack_pu > 0.0 && self.slack_pu.is_finite()) {
            return Err(Error::Config("slack_pu must be positive".into()));
        }
        if self.strategy == Strategy::Oracle
            && self.oracle.mode == OracleMode::Exhaustive
            && self.fleet_size() > crate::metrics::EXHAUSTIVE_MAX_EVS
        {
            return Err(Error::Config(format!(
                "oracle.mode = \"exhaustive\" handles at most {} EVs, the fleet has {}; use \"greedy\"",
                crate::metrics::EXHAUSTIVE_MAX_EVS,
                self.fleet_size()
            )));
        }
        let profiles = [
            ("price.profile", &self.price.profile),
            ("irradiance.profile", &self.irradiance.profile),
            ("household.profile", &self.household.profile),
        ];
        for (key, path) in profiles {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::Config(format!(
                        "{key}: file {} not found",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.price.profile,
            &mut self.irradiance.profile,
            &mut self.household.profile,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Parses TOML text; relative profile paths are taken from `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut config: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    config.resolve_paths(base_dir);
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Renders a config, defaults included, in the same TOML dialect.
pub fn to_toml(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}
