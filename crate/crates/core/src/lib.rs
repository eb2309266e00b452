//! Optimal bang-bang vaccination for the ICU-constrained SIR model.
//!
//! The controlled dynamics `s' = -beta*s*i - v*s`, `i' = beta*s*i - gamma*i`
//! are steered by a vaccination rate `v` in `[0, v_max]` under the hard
//! constraint `i <= i_max`. This crate provides:
//!
//! - [`dynamics`]: fixed-step integration (RK4 and implicit midpoint) with
//!   event detection, the constant-control first integral, and cost
//!   evaluation;
//! - [`viability`]: the safe set bounded by `gamma_bar`, the maximal viable
//!   set bounded by `gamma_star`, state classification and the closed-form
//!   switching point (via [`lambert`]);
//! - [`control`]: switching-time optimization over bang-bang policies and
//!   the equivalent feedback law;
//! - [`adjoint`]: backward costate integration and numerical checks of the
//!   first-order necessary conditions;
//! - [`experiments`]: deterministic scenario, cost-ratio and horizon
//!   studies.

pub mod adjoint;
pub mod control;
pub mod dynamics;
pub mod experiments;
pub mod lambert;
pub mod params;
pub mod schedule;
pub mod viability;

pub use adjoint::{
    estimate_atom, hamiltonian, solve_adjoint, switching_function, verify_candidate,
    AdjointTrajectory, VerificationReport,
};
pub use control::{
    evaluate_policy, feedback_control, optimize_switching_time, simulate_feedback, BangBangPolicy,
    OptimizationResult,
};
pub use dynamics::{
    conserved_quantity, herd_time_bound, running_cost, simulate, vector_field, Method,
    SolverConfig, Trajectory,
};
pub use lambert::{lambert_w, Branch};
pub use params::{EpidemicParams, EpidemicState, ValidationError};
pub use schedule::ControlSchedule;
pub use viability::{
    classify, gamma_bar, gamma_star, reach_time_a, switching_point, RegionLabel, SwitchingPoint,
};
