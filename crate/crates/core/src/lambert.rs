//! Real branches of the Lambert W function.
//!
//! `W(x)` inverts `w -> w*exp(w)`. The principal branch covers
//! `x >= -1/e` with `W >= -1`; the lower branch covers `-1/e <= x < 0`
//! with `W <= -1`. Both use a Halley iteration seeded from branch-point or
//! logarithmic expansions.

use std::f64::consts::E;
use std::fmt;

/// Which real branch of `W` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Principal,
    MinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambertError {
    /// Argument below the branch point `-1/e`.
    OutOfDomain { x: f64 },
    /// The lower branch is only defined for negative arguments.
    BranchMismatch { x: f64 },
}

impl fmt::Display for LambertError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutOfDomain { x } => write!(f, "lambert W undefined for x = {x} < -1/e"),
            Self::BranchMismatch { x } => {
                write!(f, "lambert W lower branch needs x < 0, got {x}")
            }
        }
    }
}

impl std::error::Error for LambertError {}

const MAX_ITER: usize = 40;
/// Slack below `-1/e` treated as the branch point rather than a domain error.
const BRANCH_POINT_SLACK: f64 = 1e-14;

/// Evaluate the requested branch of `W` at `x`.
pub fn lambert_w(branch: Branch, x: f64) -> Result<f64, LambertError> {
    if !x.is_finite() {
        return Err(LambertError::OutOfDomain { x });
    }
    // q = e*x + 1 measures the distance to the branch point.
    let q = E * x + 1.0;
    if q < -BRANCH_POINT_SLACK {
        return Err(LambertError::OutOfDomain { x });
    }
    if branch == Branch::MinusOne && x >= 0.0 {
        return Err(LambertError::BranchMismatch { x });
    }
    if q <= 0.0 {
        return Ok(-1.0);
    }

    let w0 = match branch {
        Branch::Principal => {
            if x < -0.25 {
                let p = (2.0 * q).sqrt();
                -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
            } else if x < E {
                // crude seed; Halley's cubic convergence does the rest
                x / (1.0 + x.max(0.0))
            } else {
                let l1 = x.ln();
                l1 - l1.ln()
            }
        }
        Branch::MinusOne => {
            if x < -0.25 {
                let p = (2.0 * q).sqrt();
                -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                let l1 = (-x).ln();
                l1 - (-l1).ln()
            }
        }
    };

    let mut w = w0;
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let delta = f / denom;
        w -= delta;
        // an iterate crossing w = -1 means we are at the branch point
        let crossed = match branch {
            Branch::Principal => w < -1.0,
            Branch::MinusOne => w > -1.0,
        };
        if crossed {
            w = -1.0;
            break;
        }
        if delta.abs() <= 1e-13 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_at_zero() {
        assert_eq!(lambert_w(Branch::Principal, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn branch_point_is_minus_one() {
        let x = -(-1.0f64).exp();
        assert_eq!(lambert_w(Branch::Principal, x).unwrap(), -1.0);
        assert_eq!(lambert_w(Branch::MinusOne, x).unwrap(), -1.0);
    }

    // Frozen from a Newton iteration on w*exp(w) = 1 (the omega constant).
    #[test]
    fn omega_constant() {
        let w = lambert_w(Branch::Principal, 1.0).unwrap();
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-14, "w = {w}");
    }

    #[test]
    fn rejects_below_branch_point() {
        assert!(matches!(
            lambert_w(Branch::Principal, -0.5),
            Err(LambertError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn rejects_lower_branch_of_nonnegative() {
        assert!(matches!(
            lambert_w(Branch::MinusOne, 0.1),
            Err(LambertError::BranchMismatch { .. })
        ));
        assert!(matches!(
            lambert_w(Branch::MinusOne, 0.0),
            Err(LambertError::BranchMismatch { .. })
        ));
    }

    #[test]
    fn round_trip_both_branches() {
        // deterministic sample sweep, 1e4 points per branch
        let n = 10_000;
        for k in 0..n {
            let frac = (k as f64 + 0.5) / n as f64;
            // principal: x in (-1/e, 20]
            let x = -(-1.0f64).exp() * (1.0 - frac) + 20.0 * frac;
            let w = lambert_w(Branch::Principal, x).unwrap();
            assert!(
                (w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0),
                "principal x = {x}, w = {w}"
            );
            assert!(w >= -1.0);
            // lower branch: x in (-1/e, 0)
            let x = -(-1.0f64).exp() * (1.0 - frac) - 1e-9 * frac;
            let w = lambert_w(Branch::MinusOne, x).unwrap();
            assert!(
                (w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0),
                "lower x = {x}, w = {w}"
            );
            assert!(w <= -1.0);
        }
    }
}
