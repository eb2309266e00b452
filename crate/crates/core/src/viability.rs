//! Safe and viable sets for the ICU constraint.
//!
//! The no-effort (safe) set `A` is bounded by the curve `gamma_bar`; its
//! uncontrolled trajectories peak exactly at `i_max`. The maximal viable set
//! `B` is bounded by `gamma_star`, the level curve of the full-effort first
//! integral through `(gamma/beta, i_max)`: from above it not even `v_max`
//! keeps the constraint. Between the two curves the only viable choice is
//! full effort, which is what makes the closed-form switching point below
//! meaningful.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{locate_state_event, simulate, SolverConfig, SolverError};
use crate::lambert::{lambert_w, Branch, LambertError};
use crate::params::{EpidemicParams, EpidemicState};
use crate::schedule::ControlSchedule;

/// Absolute classification band around the curve `gamma_bar`; kept below
/// integrator tolerance so labels are stable across step refinements.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Residual target for the implicit `gamma_star` root.
const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 200;
const ROOT_BRACKET_LO: f64 = 1e-16;

/// Where a state sits relative to the safe set `A`, the viable set `B` and
/// the constraint set `C = {i <= i_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    InteriorA,
    BoundaryA,
    BminusA,
    OutsideBInsideC,
    OutsideC,
}

impl RegionLabel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::InteriorA => "interior_a",
            Self::BoundaryA => "boundary_a",
            Self::BminusA => "b_minus_a",
            Self::OutsideBInsideC => "outside_b_inside_c",
            Self::OutsideC => "outside_c",
        }
    }

    /// Membership in the (closed) safe set `A`.
    pub fn in_safe_set(&self) -> bool {
        matches!(self, Self::InteriorA | Self::BoundaryA)
    }

    /// Membership in the viable set `B`.
    pub fn in_viable_set(&self) -> bool {
        matches!(self, Self::InteriorA | Self::BoundaryA | Self::BminusA)
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Intersection of the full-effort trajectory with the curve `gamma_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPoint {
    pub s_star: f64,
    pub i_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViabilityError {
    /// `v_max = 0` and the safe curve is nonpositive: `B` degenerates to `A`
    /// and no viable level exists above this `s`.
    NoViableLevel {
        s: f64,
    },
    /// The operation needs a state in `B \ A` (or on its boundary).
    NotInViableBand {
        label: RegionLabel,
    },
    /// The full-effort trajectory did not reach `A` before the horizon.
    NeverReached {
        horizon: f64,
    },
    Solver(SolverError),
    Lambert(LambertError),
}

impl fmt::Display for ViabilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoViableLevel { s } => {
                write!(f, "no viable infection level above s = {s} with v_max = 0")
            }
            Self::NotInViableBand { label } => {
                write!(f, "state classifies as {label}, outside the viable band")
            }
            Self::NeverReached { horizon } => {
                write!(f, "safe set not reached before t = {horizon}")
            }
            Self::Solver(e) => write!(f, "{e}"),
            Self::Lambert(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ViabilityError {}

impl From<SolverError> for ViabilityError {
    fn from(e: SolverError) -> Self {
        Self::Solver(e)
    }
}

impl From<LambertError> for ViabilityError {
    fn from(e: LambertError) -> Self {
        Self::Lambert(e)
    }
}

fn sigma_log(sigma: f64, ratio: f64) -> f64 {
    // sigma * ln(ratio), with the gamma = 0 limit value 0
    if sigma > 0.0 {
        sigma * ratio.ln()
    } else {
        0.0
    }
}

/// Upper boundary of the safe set `A`.
///
/// Equals `i_max` for `s <= gamma/beta` and
/// `gamma/beta + i_max - s + (gamma/beta) ln(beta s / gamma)` beyond; the two
/// branches join with matching value and derivative. Negative values mean `A`
/// is empty above that `s`.
pub fn gamma_bar(s: f64, p: &EpidemicParams) -> f64 {
    let sigma = p.sigma();
    if s <= sigma {
        p.i_max
    } else {
        sigma + p.i_max - s + sigma_log(sigma, s / sigma)
    }
}

/// Residual of the implicit equation defining `gamma_star` for `s > gamma/beta`.
///
/// `F(s, i) = s + i - gamma/beta - i_max + (v_max/beta) ln(i/i_max)
///            - (gamma/beta) ln(beta s / gamma)`;
/// `gamma_star(s)` is its unique root in `(0, i_max]`, and `F <= 0`
/// characterizes membership in `B`.
pub fn gamma_star_residual(s: f64, i: f64, p: &EpidemicParams) -> f64 {
    let sigma = p.sigma();
    s + i - sigma - p.i_max + p.v_max / p.beta * (i / p.i_max).ln() - sigma_log(sigma, s / sigma)
}

/// Upper boundary of the maximal viable set `B`.
pub fn gamma_star(s: f64, p: &EpidemicParams) -> Result<f64, ViabilityError> {
    let sigma = p.sigma();
    if s <= sigma {
        return Ok(p.i_max);
    }
    if p.v_max == 0.0 {
        let g = gamma_bar(s, p);
        if g > 0.0 {
            return Ok(g);
        }
        return Err(ViabilityError::NoViableLevel { s });
    }
    // F is strictly increasing in i, -inf at 0+ and positive at i_max.
    let mut lo = ROOT_BRACKET_LO;
    let mut hi = p.i_max;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = gamma_star_residual(s, mid, p);
        if r.abs() <= ROOT_TOL {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Classify a state against `A`, `B` and the constraint set.
pub fn classify(x: EpidemicState, p: &EpidemicParams) -> RegionLabel {
    let g = gamma_bar(x.s, p);
    if (x.i - g).abs() <= BOUNDARY_TOL {
        return RegionLabel::BoundaryA;
    }
    if x.i < g && x.i < p.i_max {
        return RegionLabel::InteriorA;
    }
    if x.i > p.i_max {
        return RegionLabel::OutsideC;
    }
    // above gamma_bar, at or below i_max
    match gamma_star(x.s, p) {
        Ok(gs) if x.i <= gs => RegionLabel::BminusA,
        _ => RegionLabel::OutsideBInsideC,
    }
}

/// Closed-form switching point for a start in the viable band.
///
/// The full-effort trajectory through `x0` meets `gamma_bar` at
/// `i_star = i0 exp((beta/v_max)(s0 - gamma/beta + i0 - i_max
///                  - (gamma/beta) ln(beta s0 / gamma)))` and
/// `s_star = -(gamma/beta) W(-exp(-(1 + (beta/gamma)(i_max - i_star))))`,
/// taking the lower branch of `W` so that `s_star >= gamma/beta`.
pub fn switching_point(
    x0: EpidemicState,
    p: &EpidemicParams,
) -> Result<SwitchingPoint, ViabilityError> {
    match classify(x0, p) {
        RegionLabel::BoundaryA => {
            // already on the boundary of A; the trajectory switches here
            return Ok(SwitchingPoint {
                s_star: x0.s,
                i_star: x0.i,
            });
        }
        RegionLabel::BminusA => {}
        label => return Err(ViabilityError::NotInViableBand { label }),
    }
    let sigma = p.sigma();
    let exponent =
        p.beta / p.v_max * (x0.s - sigma + x0.i - p.i_max - sigma_log(sigma, x0.s / sigma));
    let i_star = x0.i * exponent.exp();
    let c = 1.0 + p.beta / p.gamma * (p.i_max - i_star);
    let w = lambert_w(Branch::MinusOne, -(-c).exp())?;
    let s_star = -sigma * w;
    Ok(SwitchingPoint { s_star, i_star })
}

/// First time the full-effort trajectory from `x0` reaches the safe set.
///
/// Returns `0` for starts already in `A`; the crossing is bisected to
/// `event_tol` on the event `i - gamma_bar(s) <= 0`.
pub fn reach_time_a(
    x0: EpidemicState,
    p: &EpidemicParams,
    cfg: &SolverConfig,
) -> Result<f64, ViabilityError> {
    match classify(x0, p) {
        RegionLabel::InteriorA | RegionLabel::BoundaryA => return Ok(0.0),
        RegionLabel::BminusA => {}
        label => return Err(ViabilityError::NotInViableBand { label }),
    }
    let schedule = ControlSchedule::constant(p.v_max);
    let traj = simulate(x0, &schedule, p, cfg)?;
    locate_state_event(&traj, &schedule, p, cfg, |x| x.i - gamma_bar(x.s, p)).ok_or(
        ViabilityError::NeverReached {
            horizon: p.horizon_t,
        },
    )
}

/// One row of the exported viability curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub s: f64,
    pub gamma: f64,
    pub gamma_star: f64,
}

/// Sample both curves on an `n`-point log-uniform grid over `[gamma/beta, 1]`.
pub fn sample_curves(p: &EpidemicParams, n: usize) -> Result<Vec<CurveSample>, ViabilityError> {
    assert!(n >= 2, "curve grid needs at least two points");
    let sigma = p.sigma();
    if sigma <= 0.0 || sigma >= 1.0 || sigma.is_nan() {
        return Err(ViabilityError::Solver(SolverError::Domain {
            what: "curve export needs 0 < gamma/beta < 1",
        }));
    }
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let frac = k as f64 / (n - 1) as f64;
        // log-uniform: s = sigma^(1 - frac), hitting sigma and 1 exactly
        let s = if k == 0 {
            sigma
        } else {
            sigma.powf(1.0 - frac)
        };
        rows.push(CurveSample {
            s,
            gamma: gamma_bar(s, p),
            gamma_star: gamma_star(s, p)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::conserved_quantity;

    fn baseline() -> EpidemicParams {
        EpidemicParams::new(0.18, 0.07, 0.01, 0.005, 1.0, 0.0, 400.0).unwrap()
    }

    fn x(s: f64, i: f64) -> EpidemicState {
        EpidemicState { s, i }
    }

    #[test]
    fn gamma_bar_flat_below_threshold() {
        let p = baseline();
        assert_eq!(gamma_bar(0.2, &p), 0.005);
        assert_eq!(gamma_bar(0.0, &p), 0.005);
    }

    #[test]
    fn gamma_bar_continuous_and_smooth_at_junction() {
        let p = baseline();
        let sigma = p.sigma();
        assert_eq!(gamma_bar(sigma, &p), p.i_max);
        let eps = 1e-7;
        assert!((gamma_bar(sigma + eps, &p) - p.i_max).abs() < 1e-12);
        // one-sided derivative vanishes on the right branch too
        let slope = (gamma_bar(sigma + eps, &p) - gamma_bar(sigma, &p)) / eps;
        assert!(slope.abs() < 1e-6);
    }

    // frozen from direct evaluation of the closed form
    #[test]
    fn gamma_bar_negative_past_safe_range() {
        let p = baseline();
        let g = gamma_bar(0.7, &p);
        assert!((g - -7.752_740_809_362_03e-2).abs() < 1e-15);
        assert!(g < 0.0);
    }

    #[test]
    fn gamma_bar_strictly_decreasing_past_threshold() {
        let p = baseline();
        let mut prev = gamma_bar(p.sigma(), &p);
        for k in 1..200 {
            let s = p.sigma() + k as f64 * (1.0 - p.sigma()) / 200.0;
            let g = gamma_bar(s, &p);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn gamma_star_at_junction_is_i_max() {
        let p = baseline();
        assert_eq!(gamma_star(p.sigma(), &p).unwrap(), p.i_max);
        assert_eq!(gamma_star(0.1, &p).unwrap(), p.i_max);
    }

    #[test]
    fn gamma_star_strictly_decreasing() {
        let p = baseline();
        let a = gamma_star(0.5, &p).unwrap();
        let b = gamma_star(0.6, &p).unwrap();
        let c = gamma_star(0.7, &p).unwrap();
        assert!(a > b && b > c);
    }

    // frozen from a 200-iteration bisection oracle on (1e-16, i_max]
    #[test]
    fn gamma_star_root_at_s_07() {
        let p = baseline();
        let r = gamma_star(0.7, &p).unwrap();
        assert!((r - 1.211_830_015_381_641e-3).abs() < 1e-12, "r = {r}");
        assert!(gamma_star_residual(0.7, r, &p).abs() <= 1e-12);
    }

    #[test]
    fn gamma_star_without_control_degenerates_to_gamma_bar() {
        let mut p = baseline();
        p.v_max = 0.0;
        let s_ok = 0.4;
        assert!((gamma_star(s_ok, &p).unwrap() - gamma_bar(s_ok, &p)).abs() < 1e-15);
        assert!(matches!(
            gamma_star(0.7, &p),
            Err(ViabilityError::NoViableLevel { .. })
        ));
    }

    #[test]
    fn curves_order_between_threshold_and_one() {
        let p = baseline();
        for k in 0..100 {
            let s = p.sigma() + (k as f64 + 0.5) / 100.0 * (1.0 - p.sigma());
            let g = gamma_bar(s, &p);
            let gs = gamma_star(s, &p).unwrap();
            assert!(g <= gs + 1e-12, "s = {s}");
            assert!(gs <= p.i_max);
        }
    }

    #[test]
    fn classify_examples() {
        let p = baseline();
        assert_eq!(classify(x(p.sigma(), p.i_max), &p), RegionLabel::BoundaryA);
        assert_eq!(classify(x(0.7, 0.001), &p), RegionLabel::BminusA);
        assert_eq!(classify(x(0.3, 0.006), &p), RegionLabel::OutsideC);
        assert_eq!(classify(x(0.3, 0.001), &p), RegionLabel::InteriorA);
        assert_eq!(classify(x(0.7, 0.004), &p), RegionLabel::OutsideBInsideC);
    }

    #[test]
    fn switching_point_on_boundary_is_identity() {
        let p = baseline();
        let s0 = 0.45;
        let x0 = x(s0, gamma_bar(s0, &p));
        let sp = switching_point(x0, &p).unwrap();
        assert_eq!(sp.s_star, s0);
        assert_eq!(sp.i_star, x0.i);
    }

    // frozen from the trajectory-intersection oracle at dt = 1e-4
    // (intersection state s = 4.157911866317e-1, i = 4.110289015990e-3)
    #[test]
    fn switching_point_closed_form() {
        let p = baseline();
        let sp = switching_point(x(0.7, 0.001), &p).unwrap();
        assert!((sp.s_star - 4.157_911_871_330_916e-1).abs() < 1e-14);
        assert!((sp.i_star - 4.110_289_013_758_758e-3).abs() < 1e-15);
        assert!(sp.i_star > 0.001 && sp.i_star < 0.005);
        // lies on the curve and on the full-effort level set through x0
        assert!((sp.i_star - gamma_bar(sp.s_star, &p)).abs() <= 1e-9);
        let resid =
            conserved_quantity(x(sp.s_star, sp.i_star), x(0.7, 0.001), p.v_max, &p).unwrap();
        assert!(resid.abs() <= 1e-9, "level-set residual {resid:.3e}");
    }

    #[test]
    fn switching_point_near_junction_approaches_i_max() {
        let p = baseline();
        let eps = 1e-4;
        let s0 = p.sigma() + eps;
        let i0 = gamma_star(s0, &p).unwrap();
        let sp = switching_point(x(s0, i0 * 0.999_999), &p).unwrap();
        assert!((sp.i_star - p.i_max).abs() < 1e-3);
    }

    #[test]
    fn switching_point_rejects_states_outside_band() {
        let p = baseline();
        assert!(matches!(
            switching_point(x(0.3, 0.001), &p),
            Err(ViabilityError::NotInViableBand {
                label: RegionLabel::InteriorA
            })
        ));
        assert!(matches!(
            switching_point(x(0.7, 0.004), &p),
            Err(ViabilityError::NotInViableBand { .. })
        ));
    }

    #[test]
    fn reach_time_zero_inside_safe_set() {
        let p = baseline();
        let cfg = SolverConfig::for_horizon(400.0);
        assert_eq!(reach_time_a(x(0.3, 0.001), &p, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn reach_time_reports_short_horizons() {
        let mut p = baseline();
        p.horizon_t = 10.0; // the crossing happens near t = 50
        let cfg = SolverConfig::for_horizon(10.0);
        assert!(matches!(
            reach_time_a(x(0.7, 0.001), &p, &cfg),
            Err(ViabilityError::NeverReached { .. })
        ));
    }

    #[test]
    fn viable_boundary_is_a_full_effort_level_set() {
        // gamma_star points sit on the constant-v_max first integral through
        // the junction (gamma/beta, i_max)
        let p = baseline();
        for s in [0.45, 0.6, 0.8] {
            let level = gamma_star(s, &p).unwrap();
            let resid =
                conserved_quantity(x(s, level), x(p.sigma(), p.i_max), p.v_max, &p).unwrap();
            assert!(resid.abs() <= 1e-10, "s = {s}: residual {resid:.3e}");
        }
    }

    #[test]
    fn curve_samples_start_at_junction() {
        let p = baseline();
        let rows = sample_curves(&p, 64).unwrap();
        assert_eq!(rows.len(), 64);
        assert_eq!(rows[0].s, p.sigma());
        assert_eq!(rows[0].gamma, p.i_max);
        assert_eq!(rows[0].gamma_star, p.i_max);
        assert_eq!(rows[63].s, 1.0);
        for w in rows.windows(2) {
            assert!(w[1].s > w[0].s);
            assert!(w[1].gamma <= w[0].gamma);
            assert!(w[1].gamma_star <= w[0].gamma_star);
        }
    }
}
