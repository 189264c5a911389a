use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amas_core::config::{parse_config, RunConfig};
use amas_core::report::{self, Override};
use amas_core::sim::Strategy;
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

/// Environment variable that replaces the configured output directory.
const OUTPUT_DIR_ENV: &str = "AMAS_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "amas",
    version,
    about = "Decentralized EV smart-charging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy and write its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run several configs on the same scenario and report them side by side.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and check a config, then print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(path).with_context(|| format!("loading {}", path.display()))
}

/// Applies the output directory precedence: flag, then environment, then file.
fn output_dir(config: &mut RunConfig, flag: Option<PathBuf>, overrides: &mut Vec<Override>) {
    let (dir, source) = match (flag, std::env::var_os(OUTPUT_DIR_ENV)) {
        (Some(d), _) => (d, "cli"),
        (None, Some(d)) if !d.is_empty() => (PathBuf::from(d), "env"),
        _ => return,
    };
    overrides.push(Override {
        key: "output_dir".into(),
        value: dir.display().to_string(),
        source: source.into(),
    });
    config.output_dir = dir;
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    days: Option<usize>,
    strategy: Option<Strategy>,
    dir: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = load(&config)?;
    let mut overrides = Vec::new();
    let mut set = |key: &str, value: String| {
        overrides.push(Override {
            key: key.into(),
            value,
            source: "cli".into(),
        })
    };
    if let Some(s) = seed {
        cfg.seed = s;
        set("seed", s.to_string());
    }
    if let Some(d) = days {
        cfg.days = d;
        set("days", d.to_string());
    }
    if let Some(s) = strategy {
        cfg.strategy = s;
        set("strategy", s.to_string());
    }
    output_dir(&mut cfg, dir, &mut overrides);
    cfg.validate().context("config invalid after overrides")?;

    let result = report::execute(&cfg).context("simulation failed")?;
    let summary = report::write_run(&cfg.output_dir, &cfg, &overrides, &result)
        .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
    println!(
        "{}: {} days, cost {:.4}, violations {}/{}, fairness {}, output {}",
        summary.strategy,
        summary.days,
        summary.total_cost,
        summary.current_violations,
        summary.voltage_violations,
        summary
            .fairness
            .map_or("-".to_string(), |f| format!("{f:.4}")),
        cfg.output_dir.display()
    );
    Ok(())
}

fn compare(paths: Vec<PathBuf>, dir: Option<PathBuf>) -> Result<()> {
    let configs = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
    let mut target = configs[0].clone();
    let mut overrides = Vec::new();
    output_dir(&mut target, dir, &mut overrides);
    let results = report::compare(&configs)?;
    let summaries: Vec<_> = results.into_iter().map(|(_, s)| s).collect();
    report::write_comparison(&target.output_dir, &summaries)
        .with_context(|| format!("writing comparison to {}", target.output_dir.display()))?;
    for s in &summaries {
        println!(
            "{:<13} cost {:>12.4}  violations {}/{}  fairness {}",
            s.strategy.to_string(),
            s.total_cost,
            s.current_violations,
            s.voltage_violations,
            s.fairness.map_or("-".to_string(), |f| format!("{f:.4}"))
        );
    }
    Ok(())
}

fn validate(path: PathBuf) -> Result<()> {
    let cfg = load(&path)?;
    amas_core::sim::generate_scenario(&cfg.scenario(), cfg.seed)
        .context("scenario cannot be built")?;
    print!("{}", amas_core::config::to_toml(&cfg)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            days,
            strategy,
            output_dir,
        } => run(config, seed, days, strategy, output_dir),
        Command::Compare {
            configs,
            output_dir,
        } => compare(configs, output_dir),
        Command::Validate { config } => validate(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
