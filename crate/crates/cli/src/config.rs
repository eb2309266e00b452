//! Flat `key = value` run configuration.
//!
//! Recognized keys: `beta`, `gamma`, `v_max`, `i_max`, `lambda_v`,
//! `lambda_i`, `s0`, `i0`, `T`, `dt`, `method`. `#` starts a comment.
//! `lambda_v`, `lambda_i`, `dt` and `method` are optional and default to
//! `1`, `0`, `T/12000` and `rk4`.

use std::fmt;

use sir_icu::dynamics::{Method, SolverConfig};
use sir_icu::experiments::{ScenarioSpec, DEFAULT_HORIZONS};
use sir_icu::params::{EpidemicParams, EpidemicState};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation { message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse { line, message } => write!(f, "config line {line}: {message}"),
            Self::Validation { message } => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const KEYS: [&str; 11] = [
    "beta", "gamma", "v_max", "i_max", "lambda_v", "lambda_i", "s0", "i0", "T", "dt", "method",
];

/// Raw key-value assignments, prior to validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: Vec<(String, String)>,
}

impl RawConfig {
    /// Parse the flat text format, rejecting unknown and duplicate keys.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("empty value for `{key}`"),
                });
            }
            if cfg.values.iter().any(|(k, _)| k == key) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            cfg.values.push((key.to_string(), value.to_string()));
        }
        Ok(cfg)
    }

    /// Apply a `--set key=value` override (replaces any existing value).
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Validation {
                message: format!("--set expects key=value, got `{assignment}`"),
            })?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::Validation {
                message: format!("unknown key `{key}`"),
            });
        }
        self.values.retain(|(k, _)| k != key);
        self.values.push((key.to_string(), value.to_string()));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.get(key).ok_or_else(|| ConfigError::Validation {
            message: format!("missing key `{key}`"),
        })?;
        parse_f64(key, v)
    }

    fn optional_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            Some(v) => parse_f64(key, v),
            None => Ok(default),
        }
    }

    /// Validate the assignments into the run inputs.
    pub fn resolve(&self, name: &str) -> Result<RunSetup, ConfigError> {
        let beta = self.require_f64("beta")?;
        let gamma = self.require_f64("gamma")?;
        let v_max = self.require_f64("v_max")?;
        let i_max = self.require_f64("i_max")?;
        let s0 = self.require_f64("s0")?;
        let i0 = self.require_f64("i0")?;
        let horizon_t = self.require_f64("T")?;
        let lambda_v = self.optional_f64("lambda_v", 1.0)?;
        let lambda_i = self.optional_f64("lambda_i", 0.0)?;
        let params = EpidemicParams::new(beta, gamma, v_max, i_max, lambda_v, lambda_i, horizon_t)
            .map_err(|e| ConfigError::Validation {
                message: e.to_string(),
            })?;
        let x0 = EpidemicState::new(s0, i0).map_err(|e| ConfigError::Validation {
            message: e.to_string(),
        })?;
        let dt = self.optional_f64("dt", horizon_t / 12_000.0)?;
        let method = match self.get("method") {
            None => Method::Rk4,
            Some(m) => Method::parse(m).ok_or_else(|| ConfigError::Validation {
                message: format!("invalid method: must be rk4 or implicit_midpoint, got `{m}`"),
            })?,
        };
        let solver = SolverConfig::for_horizon(horizon_t)
            .with_method(method)
            .with_dt(dt);
        solver.validate().map_err(|e| ConfigError::Validation {
            message: e.to_string(),
        })?;
        // horizon study doubles the configured horizon three times
        let horizons: Vec<f64> = (0..DEFAULT_HORIZONS.len())
            .map(|k| horizon_t * (1u32 << k) as f64)
            .collect();
        let scenario =
            ScenarioSpec::new(name, params, x0, horizons).map_err(|e| ConfigError::Validation {
                message: e.to_string(),
            })?;
        Ok(RunSetup {
            params,
            x0,
            solver,
            scenario,
        })
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Validation {
        message: format!("key `{key}`: not a number: `{value}`"),
    })
}

/// Fully validated inputs for one run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub params: EpidemicParams,
    pub x0: EpidemicState,
    pub solver: SolverConfig,
    pub scenario: ScenarioSpec,
}

/// Canonical text round-tripping every resolved value exactly.
pub fn canonical_config(setup: &RunSetup) -> String {
    let p = &setup.params;
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    push("beta", fmt_value(p.beta));
    push("gamma", fmt_value(p.gamma));
    push("v_max", fmt_value(p.v_max));
    push("i_max", fmt_value(p.i_max));
    push("lambda_v", fmt_value(p.lambda_v));
    push("lambda_i", fmt_value(p.lambda_i));
    push("s0", fmt_value(setup.x0.s));
    push("i0", fmt_value(setup.x0.i));
    push("T", fmt_value(p.horizon_t));
    push("dt", fmt_value(setup.solver.dt));
    push("method", setup.solver.method.name().to_string());
    out
}

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}
