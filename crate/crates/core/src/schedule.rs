//! Piecewise-constant vaccination schedules.

use serde::{Deserialize, Serialize};

use crate::params::ValidationError;

/// A piecewise-constant control on right-open intervals.
///
/// `levels[k]` applies on `[breakpoints[k-1], breakpoints[k])` with the
/// convention `breakpoints[-1] = 0`; the last level extends to `t_end`.
/// At a breakpoint the control resolves to the right-limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
    /// End of the interval the schedule is defined on (`INFINITY` for
    /// schedules with no natural end, e.g. constants).
    pub t_end: f64,
}

impl ControlSchedule {
    pub fn new(
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
        t_end: f64,
    ) -> Result<Self, ValidationError> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(ValidationError::new(
                "levels",
                "must have exactly one more entry than breakpoints",
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ValidationError::new(
                "breakpoints",
                "must be strictly increasing",
            ));
        }
        if breakpoints.iter().any(|&t| !t.is_finite() || t < 0.0) {
            return Err(ValidationError::new(
                "breakpoints",
                "must be finite and nonnegative",
            ));
        }
        if levels.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(ValidationError::new(
                "levels",
                "must be finite and nonnegative",
            ));
        }
        Ok(Self {
            breakpoints,
            levels,
            t_end,
        })
    }

    /// The constant control `v` on `[0, INFINITY)`.
    pub fn constant(level: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            levels: vec![level],
            t_end: f64::INFINITY,
        }
    }

    /// `v_max` on `[0, t_star)`, zero on `[t_star, t_end]`.
    ///
    /// Degenerate switching times collapse to the corresponding constant.
    pub fn bang_bang(t_star: f64, v_max: f64, t_end: f64) -> Self {
        if t_star <= 0.0 {
            Self {
                breakpoints: Vec::new(),
                levels: vec![0.0],
                t_end,
            }
        } else if t_star >= t_end {
            Self {
                breakpoints: Vec::new(),
                levels: vec![v_max],
                t_end,
            }
        } else {
            Self {
                breakpoints: vec![t_star],
                levels: vec![v_max, 0.0],
                t_end,
            }
        }
    }

    /// Control value at time `t` (right-limit at breakpoints).
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        self.levels[k]
    }

    /// Largest level in the schedule.
    pub fn max_level(&self) -> f64 {
        self.levels.iter().cloned().fold(0.0, f64::max)
    }

    /// Breakpoints strictly inside the open interval `(t0, t1)`, in order.
    pub fn breakpoints_within(&self, t0: f64, t1: f64) -> &[f64] {
        let lo = self.breakpoints.partition_point(|&b| b <= t0);
        let hi = self.breakpoints.partition_point(|&b| b < t1);
        &self.breakpoints[lo..hi]
    }

    /// Exact mean of the control over `[t0, t1]`.
    pub fn mean_over(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return self.value_at(t0);
        }
        let mut acc = 0.0;
        let mut left = t0;
        for &b in self.breakpoints_within(t0, t1) {
            acc += self.value_at(left) * (b - left);
            left = b;
        }
        acc += self.value_at(left) * (t1 - left);
        acc / (t1 - t0)
    }
}
