//! Optimize the bundled scenario and check the necessary conditions.

use sir_icu::control::DEFAULT_GRID_N;
use sir_icu::params::{EpidemicParams, EpidemicState};
use sir_icu::{optimize_switching_time, verify_candidate, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = EpidemicParams::new(0.18, 0.07, 0.01, 0.005, 1.0, 0.0, 400.0)?;
    let x0 = EpidemicState::new(0.7, 0.001)?;
    let cfg = SolverConfig::for_horizon(p.horizon_t);

    let best = optimize_switching_time(x0, &p, &cfg, DEFAULT_GRID_N)?;
    println!(
        "stop vaccinating at t = {:.3} (cost {:.6}, switch at s = {:.4}, i = {:.6})",
        best.policy.t_star, best.cost, best.switch_state.s, best.switch_state.i
    );

    let report = verify_candidate(&best, &p, &cfg.with_dt(p.horizon_t / 48_000.0))?;
    assert!(report.phi_sign_ok && report.transversality_ok);
    println!(
        "necessary conditions hold (max Hamiltonian drift {:.2e})",
        report.hamiltonian_dev
    );
    Ok(())
}
