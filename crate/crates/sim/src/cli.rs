//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run or a file write fails, 2 for usage
//! and configuration errors.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use v2v_core::engine::EngineError;
use v2v_core::scenario::ValidationReport;
use v2v_core::{run, run_with, RunMetrics, RunOptions, ScenarioConfig, Scheme};

use crate::config::{load_with_overrides, save_scenario, ConfigLoadError};
use crate::dump::{DumpOptions, TraceDumper};
use crate::output::{
    atomic_write, metrics_csv, pair_metrics_csv, sweep_csv, to_json, Metadata, RunInfo, Table,
};
use crate::report::{latency_reduction, level_at_ccdf, log_level_grid};
use crate::sweep::{log_space, run_all, v_grid};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "V2V_SIM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "v2v-sim",
    version,
    about = "Two-timescale V2V resource allocation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario file (JSON). Built-in defaults are used when absent.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one config key after loading, e.g. `--set V=1e8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Directory for result files.
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct DumpArgs {
    /// Write tx/rx coordinates of every pair and slot.
    #[arg(long)]
    pub dump_trajectories: bool,
    /// Write every link gain of every slot (K²N rows per slot).
    #[arg(long)]
    pub dump_gains: bool,
    /// Write zone membership and RB sets of every frame.
    #[arg(long)]
    pub dump_zones: bool,
    /// Write the per-pair slot records.
    #[arg(long)]
    pub dump_slots: bool,
}

impl From<DumpArgs> for DumpOptions {
    fn from(a: DumpArgs) -> Self {
        DumpOptions {
            trajectories: a.dump_trajectories,
            gains: a.dump_gains,
            zones: a.dump_zones,
            slots: a.dump_slots,
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "proposed" => Ok(Scheme::Proposed),
        "baseline" => Ok(Scheme::Baseline),
        other => Err(format!(
            "unknown scheme `{other}` (expected proposed or baseline)"
        )),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        dumps: DumpArgs,
    },
    /// Sweep the Lyapunov parameter V.
    SweepV {
        #[command(flatten)]
        common: CommonArgs,
        /// Explicit V values, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["v_min", "v_max"])]
        v_values: Vec<f64>,
        /// Smallest V of a log-spaced grid.
        #[arg(long, requires = "v_max")]
        v_min: Option<f64>,
        /// Largest V of a log-spaced grid.
        #[arg(long, requires = "v_min")]
        v_max: Option<f64>,
        /// Points of the log-spaced grid.
        #[arg(long, default_value_t = 6)]
        points: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme, default_value = "proposed,baseline")]
        schemes: Vec<Scheme>,
    },
    /// Compare two schemes at matched K and V.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,15,20")]
        k_values: Vec<usize>,
        /// V for every row; the config value when absent.
        #[arg(long)]
        v: Option<f64>,
        /// Scheme under test and reference scheme.
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme, num_args = 1, default_value = "proposed,baseline")]
        schemes: Vec<Scheme>,
    },
    /// CCDF of the instantaneous queuing latency for both schemes.
    Ccdf {
        #[command(flatten)]
        common: CommonArgs,
        /// Smallest non-zero latency level (s).
        #[arg(long, default_value_t = 1e-6)]
        level_min: f64,
        /// Largest latency level (s).
        #[arg(long, default_value_t = 1e-1)]
        level_max: f64,
        #[arg(long, default_value_t = 10)]
        per_decade: u32,
        /// Also report the latency at which each CCDF falls to this value.
        #[arg(long, value_name = "PROB")]
        interpolate: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigLoadError),
    #[error("invalid scenario: {0}")]
    Invalid(ValidationReport),
    #[error("{0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Engine(#[from] EngineError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::Usage(_) => 2,
            CliError::Engine(_) | CliError::Io { .. } => 1,
        }
    }
}

/// Files written and lines to print after a successful command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<(), CliError> {
        atomic_write(&path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: serde::Serialize>(
        &mut self,
        path: PathBuf,
        value: &T,
    ) -> Result<(), CliError> {
        let bytes = to_json(value).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.write(path, &bytes)
    }
}

fn load(common: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    Ok(load_with_overrides(
        common.config.as_deref(),
        &common.overrides,
    )?)
}

fn prepare_out(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    Ok(dir.to_owned())
}

fn check(configs: &[ScenarioConfig]) -> Result<(), CliError> {
    for c in configs {
        let report = c.validate();
        if !report.is_empty() {
            return Err(CliError::Invalid(report));
        }
    }
    Ok(())
}

fn summary_line(label: &str, m: &RunMetrics) -> String {
    format!(
        "{label}: avg_power={:.6e} W avg_latency={:.6e} s Pr(Q>=L)={:.6e}",
        m.avg_network_power, m.avg_latency, m.reliability
    )
}

/// Runs one parsed command line.
pub fn execute(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Run { common, dumps } => cmd_run(&common, dumps.into()),
        Command::SweepV {
            common,
            v_values,
            v_min,
            v_max,
            points,
            schemes,
        } => {
            let values = match (v_min, v_max) {
                (Some(lo), Some(hi)) => {
                    if !(lo > 0.0 && hi >= lo) || points == 0 {
                        return Err(CliError::Usage(
                            "log-spaced V grid needs 0 < v-min <= v-max and points >= 1".into(),
                        ));
                    }
                    log_space(lo, hi, points)
                }
                _ => v_values,
            };
            cmd_sweep_v(&common, &values, &schemes)
        }
        Command::Compare {
            common,
            k_values,
            v,
            schemes,
        } => {
            let [a, b] = schemes[..] else {
                return Err(CliError::Usage(
                    "--schemes takes exactly two schemes".into(),
                ));
            };
            cmd_compare(&common, &k_values, v, (a, b))
        }
        Command::Ccdf {
            common,
            level_min,
            level_max,
            per_decade,
            interpolate,
        } => {
            if !(level_min > 0.0 && level_max >= level_min && per_decade > 0) {
                return Err(CliError::Usage(
                    "level grid needs 0 < level-min <= level-max and per-decade >= 1".into(),
                ));
            }
            if let Some(p) = interpolate {
                if !(p > 0.0 && p < 1.0) {
                    return Err(CliError::Usage(
                        "--interpolate takes a probability in (0,1)".into(),
                    ));
                }
            }
            let grid = log_level_grid(level_min, level_max, per_decade);
            cmd_ccdf(&common, &grid, interpolate)
        }
    }
}

pub fn cmd_run(common: &CommonArgs, dumps: DumpOptions) -> Result<Outcome, CliError> {
    let config = load(common)?;
    let dir = prepare_out(&common.out)?;
    let metrics = if dumps.any() {
        let mut dumper = TraceDumper::create(&dir, dumps).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let m = run_with(&config, RunOptions::default(), &mut dumper)?;
        dumper.finish().map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        m
    } else {
        run(&config)?
    };

    let mut out = Outcome::default();
    out.write(dir.join("metrics.csv"), &metrics_csv([&metrics]))?;
    out.write(dir.join("pair_metrics.csv"), &pair_metrics_csv(&metrics))?;
    out.write_json(dir.join("metrics.json"), &metrics)?;
    let config_path = dir.join("config.json");
    save_scenario(&config, &config_path).map_err(|source| CliError::Io {
        path: config_path.clone(),
        source,
    })?;
    out.files.push(config_path);
    let runs = vec![RunInfo::new("run", &config, &metrics)];
    out.write_json(
        dir.join("metadata.json"),
        &Metadata::new("run", &config, runs),
    )?;
    out.summary
        .push(summary_line(config.scheme.name(), &metrics));
    Ok(out)
}

pub fn cmd_sweep_v(
    common: &CommonArgs,
    v_values: &[f64],
    schemes: &[Scheme],
) -> Result<Outcome, CliError> {
    if v_values.is_empty() {
        return Err(CliError::Usage("no V values given".into()));
    }
    if schemes.is_empty() {
        return Err(CliError::Usage("no schemes given".into()));
    }
    let base = load(common)?;
    let cells = v_grid(&base, v_values, schemes);
    check(&cells)?;
    let dir = prepare_out(&common.out)?;
    let cell_dir = prepare_out(&dir.join("cells"))?;
    let results = run_all(&cells)?;

    let mut out = Outcome::default();
    let mut runs = Vec::with_capacity(cells.len());
    for (i, (cfg, m)) in cells.iter().zip(&results).enumerate() {
        let label = format!("{}_v{i:03}", cfg.scheme.name());
        out.write(cell_dir.join(format!("{label}.csv")), &metrics_csv([m]))?;
        runs.push(RunInfo::new(label, cfg, m));
    }
    let rows: Vec<(f64, &RunMetrics)> = cells.iter().map(|c| c.lyapunov_v).zip(&results).collect();
    out.write(dir.join("sweep_v.csv"), &sweep_csv(&rows))?;
    out.write_json(
        dir.join("metadata.json"),
        &Metadata::new("sweep-v", &base, runs),
    )?;
    for (v, m) in &rows {
        out.summary
            .push(summary_line(&format!("V={v:e} {}", m.scheme), m));
    }
    Ok(out)
}

pub fn cmd_compare(
    common: &CommonArgs,
    k_values: &[usize],
    v: Option<f64>,
    schemes: (Scheme, Scheme),
) -> Result<Outcome, CliError> {
    if k_values.is_empty() {
        return Err(CliError::Usage("no K values given".into()));
    }
    let base = load(common)?;
    let v = v.unwrap_or(base.lyapunov_v);
    let cells: Vec<ScenarioConfig> = k_values
        .iter()
        .flat_map(|&k| {
            let base = &base;
            [schemes.0, schemes.1].map(move |scheme| ScenarioConfig {
                num_pairs: k,
                lyapunov_v: v,
                scheme,
                ..base.clone()
            })
        })
        .collect();
    check(&cells)?;
    let dir = prepare_out(&common.out)?;
    let results = run_all(&cells)?;

    let mut t = Table::new(&[
        "num_pairs",
        "v",
        "scheme",
        "reference_scheme",
        "latency_s",
        "reference_latency_s",
        "reduction",
        "power_w",
        "reference_power_w",
    ]);
    let mut out = Outcome::default();
    let mut runs = Vec::new();
    for (i, &k) in k_values.iter().enumerate() {
        let (a, b) = (&results[2 * i], &results[2 * i + 1]);
        let reduction = latency_reduction(a.avg_latency, b.avg_latency);
        t.row([
            k.to_string(),
            v.to_string(),
            schemes.0.to_string(),
            schemes.1.to_string(),
            a.avg_latency.to_string(),
            b.avg_latency.to_string(),
            reduction.to_string(),
            a.avg_network_power.to_string(),
            b.avg_network_power.to_string(),
        ]);
        out.summary.push(format!(
            "K={k}: {} {:.6e} s vs {} {:.6e} s, reduction {:.2}%",
            schemes.0,
            a.avg_latency,
            schemes.1,
            b.avg_latency,
            100.0 * reduction
        ));
        for (cfg, m) in [(&cells[2 * i], a), (&cells[2 * i + 1], b)] {
            runs.push(RunInfo::new(format!("K{k}_{}", cfg.scheme), cfg, m));
        }
    }
    out.write(dir.join("compare.csv"), &t.into_bytes())?;
    out.write_json(
        dir.join("metadata.json"),
        &Metadata::new("compare", &base, runs),
    )?;
    Ok(out)
}

pub fn cmd_ccdf(
    common: &CommonArgs,
    grid: &[f64],
    interpolate: Option<f64>,
) -> Result<Outcome, CliError> {
    let base = load(common)?;
    let cells = [Scheme::Proposed, Scheme::Baseline].map(|scheme| ScenarioConfig {
        scheme,
        ..base.clone()
    });
    check(&cells)?;
    let dir = prepare_out(&common.out)?;
    let results = run_all(&cells)?;
    let empty =
        |_| CliError::Usage("no latency samples recorded (burn_in covers every slot)".into());
    let proposed = results[0].ccdf(grid).map_err(empty)?;
    let baseline = results[1].ccdf(grid).map_err(empty)?;

    let mut out = Outcome::default();
    let mut t = Table::new(&["latency_level_s", "ccdf_proposed", "ccdf_baseline"]);
    for (p, b) in proposed.iter().zip(&baseline) {
        t.row([p.0.to_string(), p.1.to_string(), b.1.to_string()]);
    }
    out.write(dir.join("ccdf.csv"), &t.into_bytes())?;

    if let Some(target) = interpolate {
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let (lp, lb) = (
            level_at_ccdf(&proposed, target),
            level_at_ccdf(&baseline, target),
        );
        let mut q = Table::new(&["ccdf", "latency_proposed_s", "latency_baseline_s"]);
        q.row([target.to_string(), fmt(lp), fmt(lb)]);
        out.write(dir.join("ccdf_quantiles.csv"), &q.into_bytes())?;
        let show = |x: Option<f64>| x.map_or("beyond grid".to_owned(), |v| format!("{v:.6e} s"));
        out.summary.push(format!(
            "CCDF={target:e}: proposed {} baseline {}",
            show(lp),
            show(lb)
        ));
    }
    let runs = cells
        .iter()
        .zip(&results)
        .map(|(c, m)| RunInfo::new(c.scheme.name(), c, m))
        .collect();
    out.write_json(
        dir.join("metadata.json"),
        &Metadata::new("ccdf", &base, runs),
    )?;
    for (c, m) in cells.iter().zip(&results) {
        out.summary.push(summary_line(c.scheme.name(), m));
    }
    Ok(out)
}
