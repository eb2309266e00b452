//! Command-line front end: configuration parsing, subcommands, and
//! bit-stable CSV/JSON emission.
//!
//! ```text
//! sir-icu <simulate|viability|optimize|verify|sweep-lambda|sweep-horizon|scenario>
//!         --config <path> --out <dir> [--set key=value ...]
//! ```
//!
//! Exit codes: 0 on success, 1 on configuration/validation failure, 2 on
//! numerical or I/O failure. Failures print a one-line JSON object on
//! standard error.

pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use sir_icu::control::{optimize_switching_time, DEFAULT_GRID_N};
use sir_icu::dynamics::{simulate, SolverConfig};
use sir_icu::experiments::{run_reference_scenarios, sweep_horizon, sweep_lambda, VERIFY_STEPS};
use sir_icu::schedule::ControlSchedule;
use sir_icu::verify_candidate;

use config::{canonical_config, ConfigError, RawConfig, RunSetup};
use output::{
    emit_curves_csv, emit_json, emit_sweep_csv, emit_trajectory_csv, CliEmitError, HorizonSummary,
    LambdaSweepSummary, OptimizeSummary, ScenarioSummary,
};

/// Default ratios for the `sweep-lambda` subcommand (all below `beta` for
/// the baseline epidemic, so the switch stays above the herd threshold).
pub const SWEEP_RATIOS: [f64; 4] = [0.0, 0.05, 0.1, 0.17];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Validation(_) => "validation",
            Self::Numerical(_) => "numerical",
            Self::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Validation(_) => 1,
            Self::Numerical(_) | Self::Io(_) => 2,
        }
    }

    pub fn to_json(&self) -> String {
        let message = match self {
            Self::Usage(m) | Self::Validation(m) | Self::Numerical(m) | Self::Io(m) => m,
        };
        serde_json::json!({ "kind": self.kind(), "error": message }).to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<CliEmitError> for CliError {
    fn from(e: CliEmitError) -> Self {
        match e {
            CliEmitError::Io(e) => Self::Io(e.to_string()),
            CliEmitError::Numerical(m) => Self::Numerical(m),
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn run() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

const USAGE: &str = "usage: sir-icu <simulate|viability|optimize|verify|sweep-lambda|sweep-horizon|scenario> --config <path> --out <dir> [--set key=value ...]";

struct Invocation {
    subcommand: String,
    config_path: PathBuf,
    out_dir: PathBuf,
    overrides: Vec<String>,
}

fn parse_args(args: &[String]) -> Result<Invocation, CliError> {
    let mut it = args.iter();
    let subcommand = it
        .next()
        .ok_or_else(|| CliError::Usage(USAGE.to_string()))?
        .clone();
    let known = [
        "simulate",
        "viability",
        "optimize",
        "verify",
        "sweep-lambda",
        "sweep-horizon",
        "scenario",
    ];
    if !known.contains(&subcommand.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown subcommand `{subcommand}`; {USAGE}"
        )));
    }
    let mut config_path = None;
    let mut out_dir = None;
    let mut overrides = Vec::new();
    while let Some(flag) = it.next() {
        let value = |it: &mut std::slice::Iter<String>| {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("flag {flag} needs a value")))
        };
        match flag.as_str() {
            "--config" => config_path = Some(PathBuf::from(value(&mut it)?)),
            "--out" => out_dir = Some(PathBuf::from(value(&mut it)?)),
            "--set" => overrides.push(value(&mut it)?),
            other => return Err(CliError::Usage(format!("unknown flag `{other}`; {USAGE}"))),
        }
    }
    Ok(Invocation {
        subcommand,
        config_path: config_path
            .ok_or_else(|| CliError::Usage(format!("--config is required; {USAGE}")))?,
        out_dir: out_dir.ok_or_else(|| CliError::Usage(format!("--out is required; {USAGE}")))?,
        overrides,
    })
}

pub fn dispatch(args: &[String]) -> Result<(), CliError> {
    let inv = parse_args(args)?;
    let text = fs::read_to_string(&inv.config_path)
        .map_err(|e| CliError::Validation(format!("cannot read {:?}: {e}", inv.config_path)))?;
    let mut raw = RawConfig::parse(&text)?;
    for assignment in &inv.overrides {
        raw.set(assignment)?;
    }
    let name = inv
        .config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    let setup = raw.resolve(&name)?;
    fs::create_dir_all(&inv.out_dir)?;
    fs::write(
        inv.out_dir.join("config.resolved"),
        canonical_config(&setup),
    )?;
    run_subcommand(&inv.subcommand, &setup, &inv.out_dir)
}

fn verify_config(setup: &RunSetup) -> SolverConfig {
    let t = setup.params.horizon_t;
    SolverConfig::for_horizon(t)
        .with_method(setup.solver.method)
        .with_dt(t / VERIFY_STEPS)
}

fn run_subcommand(sub: &str, setup: &RunSetup, out: &Path) -> Result<(), CliError> {
    let p = &setup.params;
    let cfg = &setup.solver;
    match sub {
        "simulate" => {
            // uncontrolled and full-effort runs, for phase portraits
            let t0 =
                simulate(setup.x0, &ControlSchedule::constant(0.0), p, cfg).map_err(numerical)?;
            emit_trajectory_csv(&t0, &out.join("trajectory_v0.csv"))?;
            let t1 = simulate(setup.x0, &ControlSchedule::constant(p.v_max), p, cfg)
                .map_err(numerical)?;
            emit_trajectory_csv(&t1, &out.join("trajectory_vmax.csv"))?;
        }
        "viability" => {
            emit_curves_csv(p, &out.join("curves.csv"))?;
        }
        "optimize" => {
            let r = optimize_switching_time(setup.x0, p, cfg, DEFAULT_GRID_N).map_err(numerical)?;
            emit_trajectory_csv(&r.trajectory, &out.join("trajectory.csv"))?;
            emit_json(
                &OptimizeSummary::from_result(&r),
                &out.join("optimize.json"),
            )?;
        }
        "verify" => {
            let r = optimize_switching_time(setup.x0, p, cfg, DEFAULT_GRID_N).map_err(numerical)?;
            let report = verify_candidate(&r, p, &verify_config(setup)).map_err(numerical)?;
            emit_json(
                &OptimizeSummary::from_result(&r),
                &out.join("optimize.json"),
            )?;
            emit_json(&report, &out.join("verify.json"))?;
        }
        "sweep-lambda" => {
            let rows = sweep_lambda(&SWEEP_RATIOS, &setup.scenario, cfg).map_err(numerical)?;
            emit_sweep_csv(&rows, &out.join("sweep_lambda.csv"))?;
            emit_json(
                &LambdaSweepSummary::from_rows(&rows, p.horizon_t),
                &out.join("lambda.json"),
            )?;
        }
        "sweep-horizon" => {
            let study = sweep_horizon(&setup.scenario, cfg).map_err(numerical)?;
            emit_sweep_csv(&study.rows, &out.join("sweep_horizon.csv"))?;
            emit_json(
                &HorizonSummary::from_study(&study),
                &out.join("horizon.json"),
            )?;
        }
        "scenario" => {
            // the bundled scenario family; the config contributes method/dt
            let results = run_reference_scenarios(cfg).map_err(numerical)?;
            let base = results
                .first()
                .map(|r| r.optimum.trajectory.times.len())
                .unwrap_or(0);
            debug_assert!(base > 0);
            let mut summaries = Vec::with_capacity(results.len());
            for r in &results {
                emit_trajectory_csv(
                    &r.optimum.trajectory,
                    &out.join(format!("trajectory_{}.csv", r.name)),
                )?;
                summaries.push(ScenarioSummary::from_result(r));
            }
            let scenario_params = sir_icu::experiments::baseline_params();
            emit_curves_csv(&scenario_params, &out.join("curves.csv"))?;
            emit_json(&summaries, &out.join("scenario.json"))?;
        }
        other => return Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
    Ok(())
}
