//! Scripted studies: the bundled cost-ratio scenarios, the cost-ratio sweep
//! and the horizon-convergence study.
//!
//! Every study is deterministic; sweep points are independent and may run on
//! a small scoped thread pool (capped by `SIR_ICU_THREADS`, 0 or 1 meaning
//! sequential) with results placed by sweep key, so the output does not
//! depend on the thread count.

use std::fmt;

use serde::Serialize;

use crate::adjoint::{verify_candidate, AdjointError, VerificationReport};
use crate::control::{optimize_switching_time, ControlError, OptimizationResult, DEFAULT_GRID_N};
use crate::dynamics::{Method, SolverConfig};
use crate::params::{EpidemicParams, EpidemicState, ValidationError};
use crate::viability::{gamma_bar, RegionLabel};

/// Verification grids use this many steps over the horizon (finer than the
/// optimizer's default so Hamiltonian residuals are meaningful).
pub const VERIFY_STEPS: f64 = 48_000.0;

/// Classification band used when reporting where a switch landed: the
/// optimizer resolves switching times to `1e-6 * T`, which maps to state
/// errors far above the library's `1e-9` boundary band.
pub const REPORT_BAND: f64 = 1e-5;

/// Horizons for the convergence study.
pub const DEFAULT_HORIZONS: [f64; 4] = [400.0, 800.0, 1600.0, 3200.0];

/// The epidemic every bundled study runs on.
pub fn baseline_params() -> EpidemicParams {
    EpidemicParams::new(0.18, 0.07, 0.01, 0.005, 1.0, 0.0, 400.0)
        .expect("baseline constants are valid")
}

pub fn baseline_state() -> EpidemicState {
    EpidemicState { s: 0.7, i: 0.001 }
}

/// A named study configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub params: EpidemicParams,
    pub x0: EpidemicState,
    /// Cost ratio `lambda_i / lambda_v` (infinite when `lambda_v = 0`).
    pub lambda_ratio: f64,
    pub horizons: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(
        name: impl Into<String>,
        params: EpidemicParams,
        x0: EpidemicState,
        horizons: Vec<f64>,
    ) -> Result<Self, ValidationError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ValidationError::new("name", "must be nonempty"));
        }
        if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ValidationError::new(
                "horizons",
                "must be strictly increasing",
            ));
        }
        params.validate()?;
        let lambda_ratio = if params.lambda_v > 0.0 {
            params.lambda_i / params.lambda_v
        } else {
            f64::INFINITY
        };
        Ok(Self {
            name,
            params,
            x0,
            lambda_ratio,
            horizons,
        })
    }

    /// Baseline epidemic with `lambda_i = ratio * lambda_v`.
    pub fn baseline(name: impl Into<String>, ratio: f64) -> Self {
        let mut params = baseline_params();
        params.lambda_i = ratio * params.lambda_v;
        Self::new(name, params, baseline_state(), DEFAULT_HORIZONS.to_vec())
            .expect("baseline scenario is valid")
    }
}

/// One output row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub key: f64,
    pub t_star: f64,
    pub cost: f64,
    pub s_at_switch: f64,
    pub region_at_switch: RegionLabel,
    pub herd_time: f64,
}

/// Everything produced for one bundled scenario.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub lambda_ratio: f64,
    pub optimum: OptimizationResult,
    pub herd_time: f64,
    pub report: VerificationReport,
    /// Switch region classified with [`REPORT_BAND`].
    pub region_at_switch: RegionLabel,
}

#[derive(Debug)]
pub enum ExperimentError {
    Control(ControlError),
    Adjoint(AdjointError),
    Invalid(ValidationError),
    /// A qualitative ordering the scenario family guarantees failed.
    OrderingViolated {
        scenario: String,
        what: String,
    },
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Control(e) => write!(f, "{e}"),
            Self::Adjoint(e) => write!(f, "{e}"),
            Self::Invalid(e) => write!(f, "{e}"),
            Self::OrderingViolated { scenario, what } => {
                write!(f, "scenario {scenario}: {what}")
            }
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ControlError> for ExperimentError {
    fn from(e: ControlError) -> Self {
        Self::Control(e)
    }
}

impl From<AdjointError> for ExperimentError {
    fn from(e: AdjointError) -> Self {
        Self::Adjoint(e)
    }
}

impl From<ValidationError> for ExperimentError {
    fn from(e: ValidationError) -> Self {
        Self::Invalid(e)
    }
}

/// Classify against the safe set with a reporting band instead of the tight
/// library band.
pub fn region_with_band(x: EpidemicState, p: &EpidemicParams, band: f64) -> RegionLabel {
    if (x.i - gamma_bar(x.s, p)).abs() <= band {
        RegionLabel::BoundaryA
    } else {
        crate::viability::classify(x, p)
    }
}

fn verify_cfg(p: &EpidemicParams, method: Method) -> SolverConfig {
    SolverConfig::for_horizon(p.horizon_t)
        .with_method(method)
        .with_dt(p.horizon_t / VERIFY_STEPS)
}

fn run_one(spec: &ScenarioSpec, cfg: &SolverConfig) -> Result<ScenarioResult, ExperimentError> {
    let p = spec.params;
    let optimum = optimize_switching_time(spec.x0, &p, cfg, DEFAULT_GRID_N)?;
    let herd_time = optimum.trajectory.herd_time.unwrap_or(f64::NAN);
    let report = verify_candidate(&optimum, &p, &verify_cfg(&p, cfg.method))?;
    let region_at_switch = region_with_band(optimum.switch_state, &p, REPORT_BAND);
    Ok(ScenarioResult {
        name: spec.name.clone(),
        lambda_ratio: spec.lambda_ratio,
        optimum,
        herd_time,
        report,
        region_at_switch,
    })
}

/// Run the three bundled cost-ratio scenarios and check their qualitative
/// orderings: with no infection cost the switch lands on the safe boundary
/// before herd immunity; with comparable costs vaccination outlasts the
/// herd crossing; every optimum is feasible.
pub fn run_reference_scenarios(cfg: &SolverConfig) -> Result<Vec<ScenarioResult>, ExperimentError> {
    let specs = [
        ScenarioSpec::baseline("a", 0.0),
        ScenarioSpec::baseline("b", 0.17),
        ScenarioSpec::baseline("c", 1.0),
    ];
    let mut results = Vec::with_capacity(specs.len());
    for spec in &specs {
        let r = run_one(spec, cfg)?;
        if !r.optimum.feasible {
            return Err(ExperimentError::OrderingViolated {
                scenario: r.name.clone(),
                what: "optimal trajectory is infeasible".into(),
            });
        }
        match r.name.as_str() {
            "a" => {
                if r.region_at_switch != RegionLabel::BoundaryA {
                    return Err(ExperimentError::OrderingViolated {
                        scenario: r.name.clone(),
                        what: format!("switch landed in {}", r.region_at_switch),
                    });
                }
                if r.herd_time.is_nan() || r.optimum.policy.t_star >= r.herd_time {
                    return Err(ExperimentError::OrderingViolated {
                        scenario: r.name.clone(),
                        what: "switch did not precede herd immunity".into(),
                    });
                }
            }
            "b" => {
                let sigma = r.optimum.switch_state.s - spec.params.sigma();
                if sigma < -1e-6 {
                    return Err(ExperimentError::OrderingViolated {
                        scenario: r.name.clone(),
                        what: "switch fell below the herd threshold".into(),
                    });
                }
            }
            "c" if r.herd_time.is_nan() || r.optimum.policy.t_star <= r.herd_time => {
                return Err(ExperimentError::OrderingViolated {
                    scenario: r.name.clone(),
                    what: "vaccination stopped before herd immunity".into(),
                });
            }
            _ => {}
        }
        results.push(r);
    }
    Ok(results)
}

/// Optimize once per cost ratio; `key` is the ratio.
pub fn sweep_lambda(
    ratios: &[f64],
    base: &ScenarioSpec,
    cfg: &SolverConfig,
) -> Result<Vec<SweepRow>, ExperimentError> {
    sweep_lambda_with_threads(ratios, base, cfg, thread_budget())
}

pub fn sweep_lambda_with_threads(
    ratios: &[f64],
    base: &ScenarioSpec,
    cfg: &SolverConfig,
    threads: usize,
) -> Result<Vec<SweepRow>, ExperimentError> {
    let jobs: Vec<(f64, EpidemicParams)> = ratios
        .iter()
        .map(|&r| {
            let mut p = base.params;
            p.lambda_i = r * p.lambda_v;
            (r, p)
        })
        .collect();
    run_rows(&jobs, base.x0, cfg, threads)
}

/// Result of the horizon-convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonStudy {
    pub rows: Vec<SweepRow>,
    /// `|t_star(T_{j+1}) - t_star(T_j)|`, one entry per consecutive pair.
    pub diffs: Vec<f64>,
}

/// Optimize once per horizon in `spec.horizons`; `key` is the horizon.
///
/// The caller's `cfg.dt` fixes the number of steps relative to the first
/// horizon; later horizons scale `dt` so every run uses the same grid size.
pub fn sweep_horizon(
    spec: &ScenarioSpec,
    cfg: &SolverConfig,
) -> Result<HorizonStudy, ExperimentError> {
    let steps = (spec.horizons[0] / cfg.dt).round().max(1.0);
    let jobs: Vec<(f64, EpidemicParams)> = spec
        .horizons
        .iter()
        .map(|&t| {
            let mut p = spec.params;
            p.horizon_t = t;
            (t, p)
        })
        .collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (key, p) in &jobs {
        let cfg_t = SolverConfig {
            method: cfg.method,
            dt: p.horizon_t / steps,
            event_tol: 1e-9 * p.horizon_t,
            contact_tol: cfg.contact_tol,
        };
        rows.push(row_for(*key, *p, spec.x0, &cfg_t)?);
    }
    let diffs = rows
        .windows(2)
        .map(|w| (w[1].t_star - w[0].t_star).abs())
        .collect();
    Ok(HorizonStudy { rows, diffs })
}

fn row_for(
    key: f64,
    p: EpidemicParams,
    x0: EpidemicState,
    cfg: &SolverConfig,
) -> Result<SweepRow, ExperimentError> {
    let opt = optimize_switching_time(x0, &p, cfg, DEFAULT_GRID_N)?;
    if !opt.feasible {
        return Err(ExperimentError::OrderingViolated {
            scenario: format!("sweep key {key}"),
            what: "optimal trajectory is infeasible".into(),
        });
    }
    Ok(SweepRow {
        key,
        t_star: opt.policy.t_star,
        cost: opt.cost,
        s_at_switch: opt.switch_state.s,
        region_at_switch: region_with_band(opt.switch_state, &p, REPORT_BAND),
        herd_time: opt.trajectory.herd_time.unwrap_or(f64::NAN),
    })
}

/// Largest swept ratio whose switching time still matches the ratio-zero
/// row within `1e-5 * T` — an empirical bracket for the weight below which
/// the infection cost is inert.
pub fn coincidence_threshold(rows: &[SweepRow], horizon_t: f64) -> Option<f64> {
    let base = rows.iter().find(|r| r.key == 0.0)?;
    rows.iter()
        .filter(|r| (r.t_star - base.t_star).abs() <= 1e-5 * horizon_t)
        .map(|r| r.key)
        .fold(None, |acc: Option<f64>, k| {
            Some(acc.map_or(k, |m| m.max(k)))
        })
}

fn run_rows(
    jobs: &[(f64, EpidemicParams)],
    x0: EpidemicState,
    cfg: &SolverConfig,
    threads: usize,
) -> Result<Vec<SweepRow>, ExperimentError> {
    if threads <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(|&(k, p)| row_for(k, p, x0, cfg)).collect();
    }
    let workers = threads.min(jobs.len());
    let mut slots: Vec<Option<Result<SweepRow, ExperimentError>>> =
        (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut pending: Vec<&mut [Option<Result<SweepRow, ExperimentError>>]> = Vec::new();
        let mut rest = slots.as_mut_slice();
        let chunk = jobs.len().div_ceil(workers);
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            pending.push(head);
            rest = tail;
        }
        for (w, slot_chunk) in pending.into_iter().enumerate() {
            let jobs = &jobs[w * chunk..(w * chunk + slot_chunk.len())];
            scope.spawn(move || {
                for (slot, &(k, p)) in slot_chunk.iter_mut().zip(jobs) {
                    *slot = Some(row_for(k, p, x0, cfg));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every sweep slot filled"))
        .collect()
}

/// Worker cap from `SIR_ICU_THREADS`; unset, 0 or 1 runs sequentially.
pub fn thread_budget() -> usize {
    std::env::var("SIR_ICU_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(1)
        .max(1)
}
