//! Model constants, cost weights and epidemic states.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Model and cost constants for the controlled SIR system.
///
/// `beta` and `gamma` are the transmission and recovery rates, `v_max` the
/// maximal vaccination rate, `i_max` the ICU threshold on the infectious
/// fraction, `lambda_v`/`lambda_i` the cost weights on control effort and
/// prevalence, and `horizon_t` the final time (may be `f64::INFINITY` when a
/// study only uses it as a flag).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta: f64,
    pub gamma: f64,
    pub v_max: f64,
    pub i_max: f64,
    pub lambda_v: f64,
    pub lambda_i: f64,
    pub horizon_t: f64,
}

impl EpidemicParams {
    pub fn new(
        beta: f64,
        gamma: f64,
        v_max: f64,
        i_max: f64,
        lambda_v: f64,
        lambda_i: f64,
        horizon_t: f64,
    ) -> Result<Self, ValidationError> {
        let p = Self {
            beta,
            gamma,
            v_max,
            i_max,
            lambda_v,
            lambda_i,
            horizon_t,
        };
        p.validate()?;
        Ok(p)
    }

    /// Herd-immunity threshold `gamma / beta`.
    pub fn sigma(&self) -> f64 {
        self.gamma / self.beta
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        fn finite(name: &'static str, x: f64) -> Result<(), ValidationError> {
            if x.is_finite() {
                Ok(())
            } else {
                Err(ValidationError::new(name, "must be finite"))
            }
        }
        finite("beta", self.beta)?;
        finite("gamma", self.gamma)?;
        finite("v_max", self.v_max)?;
        finite("i_max", self.i_max)?;
        finite("lambda_v", self.lambda_v)?;
        finite("lambda_i", self.lambda_i)?;
        if self.beta <= 0.0 {
            return Err(ValidationError::new("beta", "must satisfy beta > 0"));
        }
        if self.gamma < 0.0 {
            return Err(ValidationError::new("gamma", "must satisfy gamma >= 0"));
        }
        if self.v_max < 0.0 {
            return Err(ValidationError::new("v_max", "must satisfy v_max >= 0"));
        }
        if self.i_max <= 0.0 || self.i_max > 1.0 {
            return Err(ValidationError::new("i_max", "must lie in (0, 1]"));
        }
        if self.lambda_v < 0.0 {
            return Err(ValidationError::new(
                "lambda_v",
                "must satisfy lambda_v >= 0",
            ));
        }
        if self.lambda_i < 0.0 {
            return Err(ValidationError::new(
                "lambda_i",
                "must satisfy lambda_i >= 0",
            ));
        }
        if self.lambda_v == 0.0 && self.lambda_i == 0.0 {
            return Err(ValidationError::new(
                "lambda_v, lambda_i",
                "must not both be zero",
            ));
        }
        // horizon may be the infinite-study flag, but never NaN or <= 0
        if self.horizon_t.is_nan() || self.horizon_t <= 0.0 {
            return Err(ValidationError::new("T", "must satisfy T > 0"));
        }
        Ok(())
    }
}

/// A point `(s, i)` of susceptible and infectious fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicState {
    pub s: f64,
    pub i: f64,
}

impl EpidemicState {
    pub fn new(s: f64, i: f64) -> Result<Self, ValidationError> {
        let x = Self { s, i };
        if !x.in_simplex(0.0) {
            return Err(ValidationError::new(
                "s, i",
                "must satisfy s >= 0, i >= 0, s + i <= 1",
            ));
        }
        Ok(x)
    }

    /// Membership in the simplex `{s >= 0, i >= 0, s + i <= 1}` up to `tol`.
    pub fn in_simplex(&self, tol: f64) -> bool {
        self.s >= -tol && self.i >= -tol && self.s + self.i <= 1.0 + tol
    }

    /// Componentwise clamp onto the simplex, for output formatting only.
    pub fn clamped(&self) -> Self {
        let s = self.s.clamp(0.0, 1.0);
        let i = self.i.clamp(0.0, 1.0 - s);
        Self { s, i }
    }
}

/// An invariant violation on a parameter or state field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub field: &'static str,
    pub rule: &'static str,
}

impl ValidationError {
    pub fn new(field: &'static str, rule: &'static str) -> Self {
        Self { field, rule }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.rule)
    }
}

impl std::error::Error for ValidationError {}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> EpidemicParams {
        EpidemicParams::new(0.18, 0.07, 0.01, 0.005, 1.0, 0.0, 400.0).unwrap()
    }

    #[test]
    fn sigma_is_gamma_over_beta() {
        let p = base();
        assert_eq!(p.sigma(), 0.07 / 0.18);
    }

    #[test]
    fn rejects_zero_cost_weights() {
        let err = EpidemicParams::new(0.18, 0.07, 0.01, 0.005, 0.0, 0.0, 400.0).unwrap_err();
        assert_eq!(err.field, "lambda_v, lambda_i");
    }

    #[test]
    fn rejects_icu_threshold_above_one() {
        assert!(EpidemicParams::new(0.18, 0.07, 0.01, 1.5, 1.0, 0.0, 400.0).is_err());
        assert!(EpidemicParams::new(0.18, 0.07, 0.01, 0.0, 1.0, 0.0, 400.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(EpidemicParams::new(0.0, 0.07, 0.01, 0.005, 1.0, 0.0, 400.0).is_err());
    }

    #[test]
    fn state_simplex_membership() {
        assert!(EpidemicState::new(0.7, 0.001).is_ok());
        assert!(EpidemicState::new(0.7, 0.4).is_err());
        assert!(EpidemicState::new(-0.1, 0.1).is_err());
        let x = EpidemicState {
            s: 0.9995,
            i: 0.001,
        };
        assert!(!x.in_simplex(0.0));
        assert!(x.in_simplex(1e-3));
        let c = x.clamped();
        assert!(c.s + c.i <= 1.0);
    }
}
