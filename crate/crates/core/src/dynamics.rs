//! Controlled SIR vector field, fixed-step integration with event detection,
//! conserved quantities, and cost evaluation.
//!
//! The state is `(s, i)` and the dynamics are
//! `s' = -beta*s*i - v*s`, `i' = beta*s*i - gamma*i` for a vaccination rate
//! `v` in `[0, v_max]`. Integration uses a uniform node grid; steps that
//! contain a control breakpoint are split internally at the breakpoint, so
//! node states never see a mid-step control discontinuity and both methods
//! keep their order.

use std::fmt;

use crate::params::{EpidemicParams, EpidemicState, ValidationError};
use crate::schedule::ControlSchedule;

/// Integration method for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    ImplicitMidpoint,
}

impl Method {
    pub fn parse(name: &str) -> Option<Method> {
        match name {
            "rk4" => Some(Method::Rk4),
            "implicit_midpoint" => Some(Method::ImplicitMidpoint),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::ImplicitMidpoint => "implicit_midpoint",
        }
    }
}

/// Fixed-step solver settings.
///
/// `dt` is the requested node spacing (the grid uses the nearest spacing that
/// divides the horizon exactly), `event_tol` the bisection tolerance for
/// event times, and `contact_tol` the detection band for constraint contact:
/// nodes with `i >= i_max - contact_tol` are recorded as contact times.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub dt: f64,
    pub event_tol: f64,
    pub contact_tol: f64,
}

/// Fixed-point iteration cap for the implicit midpoint stage equation.
const MIDPOINT_MAX_ITER: usize = 50;
/// Fixed-point convergence tolerance for the implicit midpoint stage.
const MIDPOINT_TOL: f64 = 1e-12;
/// Simplex violations beyond this are reported as integrator diagnostics.
const SIMPLEX_TOL: f64 = 1e-7;

impl SolverConfig {
    /// Defaults for a horizon `t`: rk4, `dt = t/12000`, `event_tol = 1e-9*t`.
    pub fn for_horizon(t: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt: t / 12000.0,
            event_tol: 1e-9 * t,
            contact_tol: 1e-5,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(SolverError::StepSizeInvalid { dt: self.dt });
        }
        if self.event_tol.is_nan()
            || self.event_tol <= 0.0
            || self.contact_tol.is_nan()
            || self.contact_tol <= 0.0
        {
            return Err(SolverError::ToleranceInvalid);
        }
        Ok(())
    }
}

/// Errors from simulation and the scalar formulas of this module.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    StepSizeInvalid {
        dt: f64,
    },
    ToleranceInvalid,
    /// The schedule does not cover `[0, T]`, or `T` is not finite.
    HorizonInvalid {
        t: f64,
        schedule_end: f64,
    },
    /// A schedule level exceeds `v_max`.
    LevelOutOfRange {
        level: f64,
        v_max: f64,
    },
    /// A computed node left the simplex by more than the diagnostic band.
    SimplexViolation {
        t: f64,
        s: f64,
        i: f64,
    },
    /// The implicit midpoint fixed point did not converge.
    MidpointNoConvergence {
        t: f64,
    },
    /// An argument left the domain of a formula (logs of nonpositive values).
    Domain {
        what: &'static str,
    },
    Invalid(ValidationError),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StepSizeInvalid { dt } => write!(f, "step size must be positive, got {dt}"),
            Self::ToleranceInvalid => write!(f, "tolerances must be positive"),
            Self::HorizonInvalid { t, schedule_end } => {
                write!(f, "schedule ends at {schedule_end} but horizon is {t}")
            }
            Self::LevelOutOfRange { level, v_max } => {
                write!(f, "control level {level} outside [0, {v_max}]")
            }
            Self::SimplexViolation { t, s, i } => {
                write!(f, "state ({s}, {i}) left the simplex at t = {t}")
            }
            Self::MidpointNoConvergence { t } => {
                write!(f, "implicit midpoint iteration did not converge at t = {t}")
            }
            Self::Domain { what } => write!(f, "domain error: {what}"),
            Self::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<ValidationError> for SolverError {
    fn from(e: ValidationError) -> Self {
        Self::Invalid(e)
    }
}

/// The controlled SIR vector field `f(s, i, v)`.
///
/// Returns `(-beta*s*i - v*s, beta*s*i - gamma*i)`.
pub fn vector_field(x: EpidemicState, v: f64, p: &EpidemicParams) -> (f64, f64) {
    let infection = p.beta * x.s * x.i;
    (-infection - v * x.s, infection - p.gamma * x.i)
}

fn rk4_step(x: EpidemicState, v: f64, h: f64, p: &EpidemicParams) -> EpidemicState {
    let (k1s, k1i) = vector_field(x, v, p);
    let (k2s, k2i) = vector_field(
        EpidemicState {
            s: x.s + 0.5 * h * k1s,
            i: x.i + 0.5 * h * k1i,
        },
        v,
        p,
    );
    let (k3s, k3i) = vector_field(
        EpidemicState {
            s: x.s + 0.5 * h * k2s,
            i: x.i + 0.5 * h * k2i,
        },
        v,
        p,
    );
    let (k4s, k4i) = vector_field(
        EpidemicState {
            s: x.s + h * k3s,
            i: x.i + h * k3i,
        },
        v,
        p,
    );
    EpidemicState {
        s: x.s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        i: x.i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
    }
}

fn implicit_midpoint_step(
    x: EpidemicState,
    v: f64,
    h: f64,
    t: f64,
    p: &EpidemicParams,
) -> Result<EpidemicState, SolverError> {
    let (fs, fi) = vector_field(x, v, p);
    let mut y = EpidemicState {
        s: x.s + h * fs,
        i: x.i + h * fi,
    };
    for _ in 0..MIDPOINT_MAX_ITER {
        let mid = EpidemicState {
            s: 0.5 * (x.s + y.s),
            i: 0.5 * (x.i + y.i),
        };
        let (gs, gi) = vector_field(mid, v, p);
        let next = EpidemicState {
            s: x.s + h * gs,
            i: x.i + h * gi,
        };
        let delta = (next.s - y.s).abs().max((next.i - y.i).abs());
        y = next;
        if delta <= MIDPOINT_TOL {
            return Ok(y);
        }
    }
    Err(SolverError::MidpointNoConvergence { t })
}

fn step(
    x: EpidemicState,
    v: f64,
    h: f64,
    t: f64,
    p: &EpidemicParams,
    method: Method,
) -> Result<EpidemicState, SolverError> {
    if h == 0.0 {
        return Ok(x);
    }
    match method {
        Method::Rk4 => Ok(rk4_step(x, v, h, p)),
        Method::ImplicitMidpoint => implicit_midpoint_step(x, v, h, t, p),
    }
}

/// Advance the state by one step of length `h` under a constant control.
pub fn advance_constant(
    x: EpidemicState,
    v: f64,
    h: f64,
    t: f64,
    p: &EpidemicParams,
    method: Method,
) -> Result<EpidemicState, SolverError> {
    step(x, v, h, t, p, method)
}

/// Advance the state over `[t0, t1]`, splitting at schedule breakpoints.
fn integrate_interval(
    mut x: EpidemicState,
    t0: f64,
    t1: f64,
    u: &ControlSchedule,
    p: &EpidemicParams,
    method: Method,
) -> Result<EpidemicState, SolverError> {
    let mut t = t0;
    for &b in u.breakpoints_within(t0, t1) {
        x = step(x, u.value_at(t), b - t, t, p, method)?;
        t = b;
    }
    step(x, u.value_at(t), t1 - t, t, p, method)
}

/// A simulated path on a uniform time grid.
///
/// `controls[k]` is the exact mean of the control over step `k`, which equals
/// the constant level except on the at-most-one step a breakpoint splits.
/// `herd_time` is the first time `s <= gamma/beta` (bisected to `event_tol`);
/// `contact_times` are the node times with `i >= i_max - contact_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EpidemicState>,
    pub controls: Vec<f64>,
    pub herd_time: Option<f64>,
    pub contact_times: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[self.times.len() - 1] / (self.times.len() - 1) as f64
    }

    pub fn terminal(&self) -> EpidemicState {
        *self
            .states
            .last()
            .expect("trajectory has at least one node")
    }

    /// Largest infectious fraction over the grid nodes.
    pub fn max_infected(&self) -> f64 {
        self.states
            .iter()
            .map(|x| x.i)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Node time of the largest infectious fraction.
    pub fn peak_time(&self) -> f64 {
        let (k, _) = self
            .states
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.i.total_cmp(&b.1.i))
            .expect("trajectory has at least one node");
        self.times[k]
    }

    /// Index of the last node with time `<= t`, clamped to a step start.
    pub fn step_index(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&tk| tk <= t);
        k.saturating_sub(1).min(self.states.len().saturating_sub(2))
    }
}

/// Simulate the controlled system on `[0, horizon_t]`.
///
/// The trajectory stays in the simplex up to a small diagnostic band;
/// violations beyond it surface as [`SolverError::SimplexViolation`] instead
/// of being clamped, so integrator bugs cannot hide behind projection.
pub fn simulate(
    x0: EpidemicState,
    u: &ControlSchedule,
    p: &EpidemicParams,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    p.validate()?;
    cfg.validate()?;
    let t_final = p.horizon_t;
    if !t_final.is_finite() || u.t_end < t_final {
        return Err(SolverError::HorizonInvalid {
            t: t_final,
            schedule_end: u.t_end,
        });
    }
    if u.max_level() > p.v_max * (1.0 + 1e-12) {
        return Err(SolverError::LevelOutOfRange {
            level: u.max_level(),
            v_max: p.v_max,
        });
    }
    if !x0.in_simplex(1e-12) {
        return Err(SolverError::SimplexViolation {
            t: 0.0,
            s: x0.s,
            i: x0.i,
        });
    }

    let n = (t_final / cfg.dt).round().max(1.0) as usize;
    let mut times = Vec::with_capacity(n + 1);
    for k in 0..=n {
        times.push(t_final * (k as f64) / (n as f64));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    states.push(x0);
    for k in 0..n {
        let (t0, t1) = (times[k], times[k + 1]);
        let x = integrate_interval(states[k], t0, t1, u, p, cfg.method)?;
        if !x.in_simplex(SIMPLEX_TOL) {
            return Err(SolverError::SimplexViolation {
                t: t1,
                s: x.s,
                i: x.i,
            });
        }
        controls.push(u.mean_over(t0, t1));
        states.push(x);
    }

    let mut traj = Trajectory {
        times,
        states,
        controls,
        herd_time: None,
        contact_times: Vec::new(),
    };
    let sigma = p.sigma();
    traj.herd_time = locate_state_event(&traj, u, p, cfg, |x| x.s - sigma);
    let band = p.i_max - cfg.contact_tol;
    traj.contact_times = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(_, x)| x.i >= band)
        .map(|(&t, _)| t)
        .collect();
    Ok(traj)
}

/// First time `g(x(t)) <= 0`, located by bisection within the bracketing step.
///
/// `g` must be positive before the event. Returns `Some(0.0)` when the event
/// already holds at the initial node and `None` when `g` stays positive on
/// the whole grid.
pub fn locate_state_event(
    traj: &Trajectory,
    u: &ControlSchedule,
    p: &EpidemicParams,
    cfg: &SolverConfig,
    g: impl Fn(&EpidemicState) -> f64,
) -> Option<f64> {
    if g(&traj.states[0]) <= 0.0 {
        return Some(traj.times[0]);
    }
    let k = (0..traj.states.len() - 1).find(|&k| g(&traj.states[k + 1]) <= 0.0)?;
    let (t0, t1) = (traj.times[k], traj.times[k + 1]);
    let x0 = traj.states[k];
    let mut lo = t0;
    let mut hi = t1;
    while hi - lo > cfg.event_tol {
        let mid = 0.5 * (lo + hi);
        let x = integrate_interval(x0, t0, mid, u, p, cfg.method)
            .expect("sub-step of an already integrated step");
        if g(&x) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// State at an off-grid time, re-integrating from the bracketing node.
pub fn state_at(
    traj: &Trajectory,
    u: &ControlSchedule,
    p: &EpidemicParams,
    cfg: &SolverConfig,
    t: f64,
) -> EpidemicState {
    if t <= 0.0 {
        return traj.states[0];
    }
    if t >= *traj.times.last().unwrap() {
        return traj.terminal();
    }
    let k = traj.step_index(t);
    integrate_interval(traj.states[k], traj.times[k], t, u, p, cfg.method)
        .expect("sub-step of an already integrated step")
}

/// Residual of the constant-control first integral through `x0`.
///
/// Along a trajectory with constant control `v0` the value
/// `s + i - s0 - i0 + (v0/beta) ln(i/i0) - (gamma/beta) ln(s/s0)`
/// is identically zero.
pub fn conserved_quantity(
    x: EpidemicState,
    x0: EpidemicState,
    v0: f64,
    p: &EpidemicParams,
) -> Result<f64, SolverError> {
    if x.s <= 0.0 || x.i <= 0.0 || x0.s <= 0.0 || x0.i <= 0.0 {
        return Err(SolverError::Domain {
            what: "conserved quantity needs s, i, s0, i0 > 0",
        });
    }
    Ok(x.s + x.i - x0.s - x0.i + v0 / p.beta * (x.i / x0.i).ln() - p.sigma() * (x.s / x0.s).ln())
}

/// Total cost `J = integral of lambda_v*v + lambda_i*i` over the grid.
///
/// The control part uses the stored per-step means, which integrate the
/// piecewise-constant control exactly; the state part uses the trapezoidal
/// rule on the nodes.
pub fn running_cost(traj: &Trajectory, p: &EpidemicParams) -> f64 {
    let mut effort = 0.0;
    let mut burden = 0.0;
    for k in 0..traj.controls.len() {
        let h = traj.times[k + 1] - traj.times[k];
        effort += traj.controls[k] * h;
        burden += 0.5 * (traj.states[k].i + traj.states[k + 1].i) * h;
    }
    p.lambda_v * effort + p.lambda_i * burden
}

/// Upper bound `(s0 - gamma/beta)^+ / (gamma * i0)` on the herd-crossing time.
pub fn herd_time_bound(x0: EpidemicState, p: &EpidemicParams) -> Result<f64, SolverError> {
    if x0.i <= 0.0 {
        return Err(SolverError::Domain {
            what: "herd time bound needs i0 > 0",
        });
    }
    if p.gamma == 0.0 {
        return Err(SolverError::Domain {
            what: "herd time bound needs gamma > 0",
        });
    }
    Ok((x0.s - p.sigma()).max(0.0) / (p.gamma * x0.i))
}
