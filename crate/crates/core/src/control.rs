//! Bang-bang vaccination policies: cost evaluation, switching-time search
//! and the feedback law.
//!
//! Optimal controls for the constrained problem are full effort up to a
//! single switching time, then zero. The optimizer therefore searches the
//! one-dimensional family of switching times: a global grid (the cost is not
//! proven unimodal) followed by golden-section refinement of the best
//! bracket.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{running_cost, simulate, state_at, SolverConfig, SolverError, Trajectory};
use crate::params::{EpidemicParams, EpidemicState};
use crate::schedule::ControlSchedule;
use crate::viability::{classify, reach_time_a, RegionLabel, ViabilityError};

/// A policy is feasible when `max i <= i_max + FEASIBILITY_TOL`; the slack
/// keeps tangential boundary contact from reading as a violation.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Golden-section time tolerance, relative to the horizon.
const REFINE_REL_TOL: f64 = 1e-6;

/// Grid costs within this of the minimum count as ties; ties resolve toward
/// the smaller switching time (least vaccination effort).
const TIE_TOL: f64 = 1e-12;

/// Default number of switching-time grid points.
pub const DEFAULT_GRID_N: usize = 2048;

/// Full effort on `[0, t_star)`, nothing afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangBangPolicy {
    pub t_star: f64,
    pub level: f64,
}

impl BangBangPolicy {
    pub fn schedule(&self, t_end: f64) -> ControlSchedule {
        ControlSchedule::bang_bang(self.t_star, self.level, t_end)
    }
}

/// Outcome of the switching-time search.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub policy: BangBangPolicy,
    pub cost: f64,
    pub trajectory: Trajectory,
    pub feasible: bool,
    /// Reach time of the safe set under full effort (0 for starts inside).
    pub t_a: f64,
    pub switch_state: EpidemicState,
    pub region_at_switch: RegionLabel,
    /// Grid switching times whose cost ties the grid minimum; more than one
    /// entry flags a possibly non-unique optimum.
    pub tied_minima: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlError {
    /// The initial state admits no feasible control.
    Infeasible {
        label: RegionLabel,
    },
    /// A constant extreme control fails to reach herd immunity before `T`.
    HorizonTooShort {
        control: f64,
    },
    /// Every evaluated switching time violated the constraint.
    NoFeasiblePolicy,
    /// The feedback law is undefined outside the viable set.
    OutsideViable {
        label: RegionLabel,
    },
    Solver(SolverError),
    Viability(ViabilityError),
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infeasible { label } => {
                write!(f, "initial state classifies as {label}: not viable")
            }
            Self::HorizonTooShort { control } => write!(
                f,
                "herd immunity not reached before the horizon under constant v = {control}"
            ),
            Self::NoFeasiblePolicy => write!(f, "no feasible switching time found"),
            Self::OutsideViable { label } => {
                write!(f, "feedback undefined for state classified as {label}")
            }
            Self::Solver(e) => write!(f, "{e}"),
            Self::Viability(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ControlError {}

impl From<SolverError> for ControlError {
    fn from(e: SolverError) -> Self {
        Self::Solver(e)
    }
}

impl From<ViabilityError> for ControlError {
    fn from(e: ViabilityError) -> Self {
        Self::Viability(e)
    }
}

/// Simulate the bang-bang policy switching at `t_star` and price it.
///
/// Returns `(cost, feasible, trajectory)`. Switching times outside `[0, T]`
/// collapse to the corresponding constant policy.
pub fn evaluate_policy(
    t_star: f64,
    x0: EpidemicState,
    p: &EpidemicParams,
    cfg: &SolverConfig,
) -> Result<(f64, bool, Trajectory), ControlError> {
    let u = ControlSchedule::bang_bang(t_star, p.v_max, p.horizon_t);
    let traj = simulate(x0, &u, p, cfg)?;
    let cost = running_cost(&traj, p);
    let feasible = traj.max_infected() <= p.i_max + FEASIBILITY_TOL;
    Ok((cost, feasible, traj))
}

struct SearchState {
    best_t: f64,
    best_cost: f64,
}

impl SearchState {
    fn new() -> Self {
        Self {
            best_t: f64::NAN,
            best_cost: f64::INFINITY,
        }
    }

    fn offer(&mut self, t: f64, cost: f64) {
        // strict improvement, or a tie at a smaller switching time
        if cost < self.best_cost - TIE_TOL || (cost < self.best_cost + TIE_TOL && t < self.best_t) {
            self.best_t = t;
            self.best_cost = cost;
        }
    }
}

/// Search the switching time minimizing the total cost over `[t_A, T]`.
///
/// Checks numerically that both extreme constant controls cross the herd
/// threshold before the horizon (else the problem is not in the regime the
/// structure theory covers), evaluates the cost on a `grid_n`-point grid,
/// and refines the best bracket by golden section. With `lambda_v = 0` the
/// optimum is full effort throughout and no search runs.
pub fn optimize_switching_time(
    x0: EpidemicState,
    p: &EpidemicParams,
    cfg: &SolverConfig,
    grid_n: usize,
) -> Result<OptimizationResult, ControlError> {
    let label0 = classify(x0, p);
    if !label0.in_viable_set() {
        return Err(ControlError::Infeasible { label: label0 });
    }
    for v0 in [0.0, p.v_max] {
        let traj = simulate(x0, &ControlSchedule::constant(v0), p, cfg)?;
        if traj.herd_time.is_none() {
            return Err(ControlError::HorizonTooShort { control: v0 });
        }
    }
    let t_a = reach_time_a(x0, p, cfg)?;
    let t_final = p.horizon_t;

    if p.lambda_v == 0.0 {
        return assemble(t_final, t_a, vec![t_final], x0, p, cfg);
    }

    let n = grid_n.max(2);
    let mut search = SearchState::new();
    let mut grid = Vec::with_capacity(n);
    for k in 0..n {
        let t = t_a + (t_final - t_a) * k as f64 / (n - 1) as f64;
        let (cost, feasible, _) = evaluate_policy(t, x0, p, cfg)?;
        let cost = if feasible { cost } else { f64::INFINITY };
        grid.push((t, cost));
        search.offer(t, cost);
    }
    if !search.best_cost.is_finite() {
        return Err(ControlError::NoFeasiblePolicy);
    }
    let grid_best = search.best_cost;
    let tied: Vec<f64> = grid
        .iter()
        .filter(|(_, c)| *c <= grid_best + TIE_TOL)
        .map(|(t, _)| *t)
        .collect();

    // refine around the best grid point
    let m = grid
        .iter()
        .position(|&(t, _)| t == search.best_t)
        .unwrap_or(0);
    let lo = grid[m.saturating_sub(1)].0;
    let hi = grid[(m + 1).min(n - 1)].0;
    golden_refine(lo, hi, REFINE_REL_TOL * t_final, &mut search, |t| {
        let (cost, feasible, _) = evaluate_policy(t, x0, p, cfg)?;
        Ok(if feasible { cost } else { f64::INFINITY })
    })?;

    assemble(search.best_t, t_a, tied, x0, p, cfg)
}

fn golden_refine(
    mut a: f64,
    mut b: f64,
    tol: f64,
    search: &mut SearchState,
    mut f: impl FnMut(f64) -> Result<f64, ControlError>,
) -> Result<(), ControlError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b - a <= tol {
        return Ok(());
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    search.offer(x1, f1);
    search.offer(x2, f2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
            search.offer(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
            search.offer(x2, f2);
        }
    }
    Ok(())
}

fn assemble(
    t_star: f64,
    t_a: f64,
    tied_minima: Vec<f64>,
    x0: EpidemicState,
    p: &EpidemicParams,
    cfg: &SolverConfig,
) -> Result<OptimizationResult, ControlError> {
    let policy = BangBangPolicy {
        t_star,
        level: p.v_max,
    };
    let u = policy.schedule(p.horizon_t);
    let trajectory = simulate(x0, &u, p, cfg)?;
    let cost = running_cost(&trajectory, p);
    let feasible = trajectory.max_infected() <= p.i_max + FEASIBILITY_TOL;
    let switch_state = state_at(&trajectory, &u, p, cfg, t_star);
    let region_at_switch = classify(switch_state, p);
    Ok(OptimizationResult {
        policy,
        cost,
        trajectory,
        feasible,
        t_a,
        switch_state,
        region_at_switch,
        tied_minima,
    })
}

/// The stationary feedback law: full effort between the curves, nothing in
/// the safe set.
pub fn feedback_control(x: EpidemicState, p: &EpidemicParams) -> Result<f64, ControlError> {
    match classify(x, p) {
        RegionLabel::BminusA => Ok(p.v_max),
        RegionLabel::InteriorA | RegionLabel::BoundaryA => Ok(0.0),
        label => Err(ControlError::OutsideViable { label }),
    }
}

/// Closed-loop integration of the feedback law.
///
/// The feedback is sampled at each grid node; when a step crosses into the
/// safe set the boundary crossing is bisected to `event_tol` and the control
/// drops to zero exactly there, so the realized control is full effort until
/// the boundary of `A`, then nothing. The returned trajectory is the
/// open-loop simulation of that schedule.
pub fn simulate_feedback(
    x0: EpidemicState,
    p: &EpidemicParams,
    cfg: &SolverConfig,
) -> Result<Trajectory, ControlError> {
    use crate::dynamics::advance_constant;
    use crate::viability::gamma_bar;

    p.validate().map_err(SolverError::from)?;
    cfg.validate()?;
    let t_final = p.horizon_t;
    if !t_final.is_finite() {
        return Err(ControlError::Solver(SolverError::HorizonInvalid {
            t: t_final,
            schedule_end: t_final,
        }));
    }
    let n = (t_final / cfg.dt).round().max(1.0) as usize;
    let mut x = x0;
    let mut entered: Option<(usize, EpidemicState)> = None;
    for k in 0..=n {
        let v = feedback_control(x, p)?;
        if v == 0.0 {
            entered = Some((k, x));
            break;
        }
        if k < n {
            let t0 = t_final * k as f64 / n as f64;
            let t1 = t_final * (k + 1) as f64 / n as f64;
            let prev = x;
            x = advance_constant(x, v, t1 - t0, t0, p, cfg.method)?;
            // remember the step start so the crossing can be refined
            if feedback_control(x, p).unwrap_or(p.v_max) == 0.0 {
                entered = Some((k + 1, prev));
                break;
            }
        }
    }
    let t_star = match entered {
        Some((0, _)) => 0.0,
        None => t_final,
        Some((k, state_before)) => {
            // bisect the boundary crossing inside the step entering A
            let t0 = t_final * (k - 1) as f64 / n as f64;
            let t1 = t_final * k as f64 / n as f64;
            let g = |y: &EpidemicState| y.i - gamma_bar(y.s, p);
            if g(&state_before) <= 0.0 {
                t0
            } else {
                let (mut lo, mut hi) = (t0, t1);
                while hi - lo > cfg.event_tol {
                    let mid = 0.5 * (lo + hi);
                    let y = advance_constant(state_before, p.v_max, mid - t0, t0, p, cfg.method)?;
                    if g(&y) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    };
    let u = ControlSchedule::bang_bang(t_star, p.v_max, t_final);
    Ok(simulate(x0, &u, p, cfg)?)
}
