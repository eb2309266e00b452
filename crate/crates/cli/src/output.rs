//! Bit-stable CSV and JSON emission.
//!
//! Floating values print with 17 significant digits (`{:.16e}`), which
//! round-trips every finite f64 exactly, so byte comparison of outputs is a
//! valid regression check. Rows end with `\n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sir_icu::adjoint::VerificationReport;
use sir_icu::dynamics::Trajectory;
use sir_icu::experiments::{HorizonStudy, ScenarioResult, SweepRow};
use sir_icu::params::EpidemicParams;
use sir_icu::viability::sample_curves;
use sir_icu::OptimizationResult;

/// 17 significant digits; exact round trip for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    file.flush()
}

/// `t,s,i,v` with one row per grid node.
///
/// States are clamped onto the simplex for formatting only; the trailing
/// node repeats the last step's control.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.times.len() * 96);
    out.push_str("t,s,i,v\n");
    let n = traj.controls.len();
    for (k, &t) in traj.times.iter().enumerate() {
        let x = traj.states[k].clamped();
        let v = traj.controls[k.min(n.saturating_sub(1))];
        out.push_str(&fmt_f64(t));
        out.push(',');
        out.push_str(&fmt_f64(x.s));
        out.push(',');
        out.push_str(&fmt_f64(x.i));
        out.push(',');
        out.push_str(&fmt_f64(v));
        out.push('\n');
    }
    out
}

pub fn emit_trajectory_csv(traj: &Trajectory, path: &Path) -> std::io::Result<()> {
    write_atomically(path, trajectory_csv(traj).as_bytes())
}

/// `s,gamma,gamma_star` over the log-uniform grid.
pub fn curves_csv(
    p: &EpidemicParams,
    n: usize,
) -> Result<String, sir_icu::viability::ViabilityError> {
    let rows = sample_curves(p, n)?;
    let mut out = String::with_capacity(rows.len() * 72);
    out.push_str("s,gamma,gamma_star\n");
    for r in rows {
        out.push_str(&fmt_f64(r.s));
        out.push(',');
        out.push_str(&fmt_f64(r.gamma));
        out.push(',');
        out.push_str(&fmt_f64(r.gamma_star));
        out.push('\n');
    }
    Ok(out)
}

pub const CURVE_ROWS: usize = 4096;

pub fn emit_curves_csv(p: &EpidemicParams, path: &Path) -> Result<(), CliEmitError> {
    let text = curves_csv(p, CURVE_ROWS).map_err(|e| CliEmitError::Numerical(e.to_string()))?;
    write_atomically(path, text.as_bytes()).map_err(CliEmitError::from)
}

/// `key,t_star,cost,s_at_switch,region_at_switch,herd_time`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 128 + 64);
    out.push_str("key,t_star,cost,s_at_switch,region_at_switch,herd_time\n");
    for r in rows {
        out.push_str(&fmt_f64(r.key));
        out.push(',');
        out.push_str(&fmt_f64(r.t_star));
        out.push(',');
        out.push_str(&fmt_f64(r.cost));
        out.push(',');
        out.push_str(&fmt_f64(r.s_at_switch));
        out.push(',');
        out.push_str(r.region_at_switch.name());
        out.push(',');
        out.push_str(&fmt_f64(r.herd_time));
        out.push('\n');
    }
    out
}

pub fn emit_sweep_csv(rows: &[SweepRow], path: &Path) -> std::io::Result<()> {
    write_atomically(path, sweep_csv(rows).as_bytes())
}

#[derive(Debug)]
pub enum CliEmitError {
    Io(std::io::Error),
    Numerical(String),
}

impl From<std::io::Error> for CliEmitError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

#[derive(Serialize)]
pub struct OptimizeSummary {
    pub t_star: f64,
    pub cost: f64,
    pub feasible: bool,
    pub t_a: f64,
    pub switch_s: f64,
    pub switch_i: f64,
    pub region_at_switch: &'static str,
    pub herd_time: Option<f64>,
    pub tied_minima: Vec<f64>,
}

impl OptimizeSummary {
    pub fn from_result(r: &OptimizationResult) -> Self {
        Self {
            t_star: r.policy.t_star,
            cost: r.cost,
            feasible: r.feasible,
            t_a: r.t_a,
            switch_s: r.switch_state.s,
            switch_i: r.switch_state.i,
            region_at_switch: r.region_at_switch.name(),
            herd_time: r.trajectory.herd_time,
            tied_minima: r.tied_minima.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub lambda_ratio: f64,
    pub t_star: f64,
    pub cost: f64,
    pub herd_time: f64,
    pub region_at_switch: &'static str,
    pub report: VerificationReport,
}

impl ScenarioSummary {
    pub fn from_result(r: &ScenarioResult) -> Self {
        Self {
            name: r.name.clone(),
            lambda_ratio: r.lambda_ratio,
            t_star: r.optimum.policy.t_star,
            cost: r.optimum.cost,
            herd_time: r.herd_time,
            region_at_switch: r.region_at_switch.name(),
            report: r.report.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct LambdaSweepSummary {
    pub ratios: Vec<f64>,
    pub t_stars: Vec<f64>,
    /// Largest ratio whose switch still matches the ratio-zero one.
    pub coincidence_threshold: Option<f64>,
}

impl LambdaSweepSummary {
    pub fn from_rows(rows: &[SweepRow], horizon_t: f64) -> Self {
        Self {
            ratios: rows.iter().map(|r| r.key).collect(),
            t_stars: rows.iter().map(|r| r.t_star).collect(),
            coincidence_threshold: sir_icu::experiments::coincidence_threshold(rows, horizon_t),
        }
    }
}

#[derive(Serialize)]
pub struct HorizonSummary {
    pub t_stars: Vec<f64>,
    pub diffs: Vec<f64>,
}

impl HorizonSummary {
    pub fn from_study(study: &HorizonStudy) -> Self {
        Self {
            t_stars: study.rows.iter().map(|r| r.t_star).collect(),
            diffs: study.diffs.clone(),
        }
    }
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable summary");
    text.push('\n');
    write_atomically(path, text.as_bytes())
}
