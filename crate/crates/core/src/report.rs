//! Running configured strategies and writing their results to disk.
//!
//! A run directory holds:
//!
//! - `days.csv`: one row per day with reward, cost, violations, fairness
//! - `evs.csv`: per-EV daily cost and energy
//! - `reward_vs_day.csv`, `cost_bars.csv`: plot data
//! - `summary.json`: totals, convergence day, fairness
//! - `manifest.json`: the fully resolved config and every override
//! - `checkpoint.json`: learner state after the last day
//!
//! Identical inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::metrics::SimulationMetrics;
use crate::sim::{generate_scenario, Checkpoint, Scenario, Simulation, Strategy};
use crate::{Error, Result};

pub const RUN_FORMAT: &str = "amas-run/v1";

/// Days averaged by the rolling reward used for convergence detection.
pub const ROLLING_DAYS: usize = 5;
/// Relative band around the plateau that counts as converged.
pub const PLATEAU_BAND: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategy: Strategy,
    pub metrics: SimulationMetrics,
    pub checkpoint: Checkpoint,
}

/// A value that replaced what the config file said.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub key: String,
    pub value: String,
    /// `cli` or `env`.
    pub source: String,
}

/// Builds the scenario and runs the configured strategy.
pub fn execute(config: &RunConfig) -> Result<RunResult> {
    let scenario = generate_scenario(&config.scenario(), config.seed)?;
    execute_on(config, &scenario)
}

pub fn execute_on(config: &RunConfig, scenario: &Scenario) -> Result<RunResult> {
    let mut sim = Simulation::new(scenario, config.strategy, config.engine_options())?;
    sim.run_days(config.days)?;
    let checkpoint = Checkpoint::capture(&sim);
    Ok(RunResult {
        strategy: config.strategy,
        metrics: sim.into_metrics(),
        checkpoint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub day: usize,
    pub mean_reward: Option<f64>,
    pub total_cost: f64,
    pub current_violations: usize,
    pub voltage_violations: usize,
    pub fairness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvRow {
    pub day: usize,
    pub ev: usize,
    pub cost: f64,
    pub energy_kwh: f64,
    pub per_unit_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub day: usize,
    pub mean_reward: Option<f64>,
    pub rolling_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBar {
    pub strategy: Strategy,
    pub total_cost: f64,
    pub converged_cost: f64,
    pub current_violations: usize,
    pub voltage_violations: usize,
    pub fairness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: Strategy,
    pub days: usize,
    pub seed: u64,
    pub evs: usize,
    pub total_cost: f64,
    pub total_energy_kwh: f64,
    pub current_violations: usize,
    pub voltage_violations: usize,
    /// First day (1-based) from which the rolling mean reward stays within
    /// the plateau band.
    pub convergence_day: Option<usize>,
    pub plateau_reward: Option<f64>,
    /// Days counted as converged: the second half of the run.
    pub converged_from_day: usize,
    pub converged_cost: f64,
    pub converged_current_violations: usize,
    pub converged_voltage_violations: usize,
    /// `None` for uncontrolled charging.
    pub fairness: Option<f64>,
    pub converged_fairness: Option<f64>,
    pub unmet_ev_days: usize,
    pub curtailments: usize,
}

fn rolling(values: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|d| {
            let lo = (d + 1).saturating_sub(window);
            let seen: Vec<f64> = values[lo..=d].iter().flatten().copied().collect();
            (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64)
        })
        .collect()
}

/// Plateau and convergence day of a reward series.
///
/// The plateau is the mean reward of the final third of the run; the run
/// has converged on the first day after which the rolling mean never leaves
/// the band around it.
pub fn convergence(rewards: &[Option<f64>]) -> (Option<f64>, Option<usize>) {
    if rewards.is_empty() {
        return (None, None);
    }
    let tail = (rewards.len() / 3).max(1);
    let last: Vec<f64> = rewards[rewards.len() - tail..]
        .iter()
        .flatten()
        .copied()
        .collect();
    if last.is_empty() {
        return (None, None);
    }
    let plateau = last.iter().sum::<f64>() / last.len() as f64;
    let band = PLATEAU_BAND * plateau.abs();
    let roll = rolling(rewards, ROLLING_DAYS);
    let mut day = None;
    for d in (0..roll.len()).rev() {
        match roll[d] {
            Some(r) if (r - plateau).abs() <= band => day = Some(d + 1),
            Some(_) => break,
            None => {}
        }
    }
    (Some(plateau), day)
}

pub fn summarize(config: &RunConfig, metrics: &SimulationMetrics) -> Summary {
    let days = metrics.days.len();
    let rewards: Vec<Option<f64>> = metrics.days.iter().map(|d| d.mean_reward).collect();
    let (plateau, convergence_day) = convergence(&rewards);
    let half = days / 2;
    let (cv, vv) = metrics.violations(0..days);
    let (ccv, cvv) = metrics.violations(half..days);
    let fairness_on = config.strategy != Strategy::Uncontrolled;
    Summary {
        strategy: config.strategy,
        days,
        seed: config.seed,
        evs: metrics.ev_cost.first().map_or(0, Vec::len),
        total_cost: metrics.total_cost(0..days),
        total_energy_kwh: metrics.days.iter().map(|d| d.energy_kwh).sum(),
        current_violations: cv,
        voltage_violations: vv,
        convergence_day,
        plateau_reward: plateau,
        converged_from_day: half + 1,
        converged_cost: metrics.total_cost(half..days),
        converged_current_violations: ccv,
        converged_voltage_violations: cvv,
        fairness: fairness_on
            .then(|| metrics.fairness_over(0..days))
            .flatten(),
        converged_fairness: fairness_on
            .then(|| metrics.fairness_over(half..days))
            .flatten(),
        unmet_ev_days: metrics.days.iter().map(|d| d.unmet_evs).sum(),
        curtailments: metrics.days.iter().map(|d| d.curtailments).sum(),
    }
}

pub fn day_rows(metrics: &SimulationMetrics) -> Vec<DayRow> {
    metrics
        .days
        .iter()
        .map(|d| DayRow {
            day: d.day + 1,
            mean_reward: d.mean_reward,
            total_cost: d.total_cost,
            current_violations: d.current_violations,
            voltage_violations: d.voltage_violations,
            fairness: d.fairness,
        })
        .collect()
}

fn write_csv<S: Serialize>(path: &Path, header: &[&str], rows: &[S]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_csv<S: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<S>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    overrides: &'a [Override],
    files: &'static [&'static str],
}

const RUN_FILES: &[&str] = &[
    "days.csv",
    "evs.csv",
    "reward_vs_day.csv",
    "cost_bars.csv",
    "summary.json",
    "checkpoint.json",
    "manifest.json",
];

/// Writes every artifact of one run into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    config: &RunConfig,
    overrides: &[Override],
    result: &RunResult,
) -> Result<Summary> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let metrics = &result.metrics;
    write_csv(
        &dir.join("days.csv"),
        &[
            "day",
            "mean_reward",
            "total_cost",
            "current_violations",
            "voltage_violations",
            "fairness",
        ],
        &day_rows(metrics),
    )?;

    let mut evs = Vec::new();
    for (d, (costs, energies)) in metrics.ev_cost.iter().zip(&metrics.ev_energy).enumerate() {
        for (e, (&cost, &energy)) in costs.iter().zip(energies).enumerate() {
            evs.push(EvRow {
                day: d + 1,
                ev: e,
                cost,
                energy_kwh: energy,
                per_unit_cost: (energy > 0.0).then(|| cost / energy),
            });
        }
    }
    write_csv(
        &dir.join("evs.csv"),
        &["day", "ev", "cost", "energy_kwh", "per_unit_cost"],
        &evs,
    )?;

    let rewards: Vec<Option<f64>> = metrics.days.iter().map(|d| d.mean_reward).collect();
    let reward_rows: Vec<RewardRow> = rewards
        .iter()
        .zip(rolling(&rewards, ROLLING_DAYS))
        .enumerate()
        .map(|(d, (&r, roll))| RewardRow {
            day: d + 1,
            mean_reward: r,
            rolling_mean: roll,
        })
        .collect();
    write_csv(
        &dir.join("reward_vs_day.csv"),
        &["day", "mean_reward", "rolling_mean"],
        &reward_rows,
    )?;

    let summary = summarize(config, metrics);
    write_csv(
        &dir.join("cost_bars.csv"),
        COST_BAR_HEADER,
        &[cost_bar(&summary)],
    )?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("checkpoint.json"), &result.checkpoint)?;
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            format: RUN_FORMAT,
            version: env!("CARGO_PKG_VERSION"),
            config,
            overrides,
            files: RUN_FILES,
        },
    )?;
    Ok(summary)
}

const COST_BAR_HEADER: &[&str] = &[
    "strategy",
    "total_cost",
    "converged_cost",
    "current_violations",
    "voltage_violations",
    "fairness",
];

fn cost_bar(s: &Summary) -> CostBar {
    CostBar {
        strategy: s.strategy,
        total_cost: s.total_cost,
        converged_cost: s.converged_cost,
        current_violations: s.current_violations,
        voltage_violations: s.voltage_violations,
        fairness: s.fairness,
    }
}

/// Runs that share one scenario and differ only in strategy settings.
pub fn compare(configs: &[RunConfig]) -> Result<Vec<(RunResult, Summary)>> {
    let first = configs
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one config".into()))?;
    for c in &configs[1..] {
        if c.scenario() != first.scenario() || c.seed != first.seed || c.days != first.days {
            return Err(Error::Config(
                "compared configs must share scenario, seed and days".into(),
            ));
        }
    }
    let scenario = generate_scenario(&first.scenario(), first.seed)?;
    configs
        .iter()
        .map(|c| {
            let result = execute_on(c, &scenario)?;
            let summary = summarize(c, &result.metrics);
            Ok((result, summary))
        })
        .collect()
}

/// Writes `compare.csv` and `compare.json` side by side.
pub fn write_comparison(dir: &Path, summaries: &[Summary]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let bars: Vec<CostBar> = summaries.iter().map(cost_bar).collect();
    write_csv(&dir.join("compare.csv"), COST_BAR_HEADER, &bars)?;
    write_json(&dir.join("compare.json"), &summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_of_a_step() {
        let mut r = vec![Some(0.2); 5];
        r.extend(vec![Some(0.5); 25]);
        let (plateau, day) = convergence(&r);
        assert_eq!(plateau, Some(0.5));
        // rolling window of 5 is fully on the plateau from day 10
        assert_eq!(day, Some(10));
        assert_eq!(convergence(&[]), (None, None));
        assert_eq!(convergence(&[None, None]), (None, None));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            DayRow {
                day: 1,
                mean_reward: Some(0.125),
                total_cost: 3.5,
                current_violations: 0,
                voltage_violations: 2,
                fairness: None,
            },
            DayRow {
                day: 2,
                mean_reward: None,
                total_cost: 0.1 + 0.2,
                current_violations: 1,
                voltage_violations: 0,
                fairness: Some(0.99),
            },
        ];
        let path = dir.path().join("d.csv");
        write_csv(
            &path,
            &[
                "day",
                "mean_reward",
                "total_cost",
                "current_violations",
                "voltage_violations",
                "fairness",
            ],
            &rows,
        )
        .unwrap();
        let back: Vec<DayRow> = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }
}
