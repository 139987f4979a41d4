//! End-to-end runs of the reference scenario and its variations.

use std::sync::OnceLock;

use posnav::harness::{analyze, run_scenario, CheckWindows, RunChecks, RunConfig, RunLog};
use posnav::observer::Variant;
use posnav::Error;

fn reference() -> &'static (RunConfig, RunLog, RunChecks) {
    static REF: OnceLock<(RunConfig, RunLog, RunChecks)> = OnceLock::new();
    REF.get_or_init(|| {
        let cfg = RunConfig::from_toml("").unwrap();
        let log = run_scenario(&cfg).unwrap();
        let checks = analyze(&log, CheckWindows::for_horizon(cfg.scenario.t_end));
        (cfg, log, checks)
    })
}

fn run(toml: &str) -> posnav::Result<RunLog> {
    run_scenario(&RunConfig::from_toml(toml)?)
}

#[test]
fn zero_horizon_gives_initial_row() {
    let log = run("[scenario]\nt_end = 0.0\n").unwrap();
    assert_eq!(log.rows.len(), 1);
    let row = &log.rows[0];
    assert_eq!(row.t, 0.0);
    for rec in &row.observers {
        // p~(0) = [1, 0, 1], v~(0) = v(0) = 0, R~(0) a quarter turn, b~(0) = b.
        assert!((rec.p_err_norm - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rec.v_err_norm, 0.0);
        assert!((rec.dist_r - 0.5).abs() < 1e-15);
        assert!((rec.tilde_b_norm - 3f64.sqrt() * 3f64.to_radians()).abs() < 1e-15);
    }
}

#[test]
fn log_grid_is_uniform() {
    let log = run("[scenario]\nt_end = 0.75\ndt = 0.01\n").unwrap();
    assert_eq!(log.rows.len(), 76);
    for (k, row) in log.rows.iter().enumerate() {
        assert_eq!(row.t, k as f64 * 0.01);
    }
    assert_eq!(log.monitors.len(), 8);
}

#[test]
fn proposed_run_never_reads_adhoc_state() {
    let both = run("[scenario]\nt_end = 5.0\n").unwrap();
    let alone = run("[scenario]\nt_end = 5.0\n[run]\nobserver = \"proposed\"\n").unwrap();
    let idx = both.index_of(Variant::Proposed).unwrap();
    for (a, b) in alone.rows.iter().zip(&both.rows) {
        assert_eq!(a.observers[0], b.observers[idx]);
    }
}

#[test]
fn proposed_observer_converges() {
    let o = reference().2.get("proposed").unwrap();
    let [p, v, r, b] = o.final_errors;
    assert!(p < 1e-5 && v < 1e-4, "p {p:e} v {v:e}");
    assert!(r < 1e-10 && b < 1e-6, "R {r:e} b {b:e}");
}

#[test]
fn adhoc_observer_drifts_late() {
    let o = reference().2.get("adhoc").unwrap();
    assert!(o.final_errors[2] > 0.5);
    assert!(o.late_mean_p_err > 0.5);
}

#[test]
fn separation_regression_values() {
    let (_, _, checks) = reference();
    let p = checks.get("proposed").unwrap();
    let a = checks.get("adhoc").unwrap();
    let rel = |x: f64, pinned: f64| (x - pinned).abs() / pinned;
    assert!(
        rel(a.late_mean_dist_r, 0.687531) < 1e-3,
        "{}",
        a.late_mean_dist_r
    );
    assert!(
        rel(a.late_mean_p_err, 0.785418) < 1e-3,
        "{}",
        a.late_mean_p_err
    );
    assert!(p.late_mean_dist_r < 1e-9);
    assert!(p.late_max_p_err < 1e-5);
}

#[test]
fn bias_estimate_stays_in_projection_ball() {
    let (_, log, checks) = reference();
    let radius = log.context.gains.bias_radius();
    for o in &checks.observers {
        assert!(
            o.max_b_hat_norm <= radius + 1e-12,
            "{}: {}",
            o.observer,
            o.max_b_hat_norm
        );
    }
}

#[test]
fn attitude_distance_respects_rate_bound() {
    for o in &reference().2.observers {
        assert!(
            o.max_attitude_rate <= o.attitude_rate_bound,
            "{}",
            o.observer
        );
    }
}

#[test]
fn zeta_follows_its_model_dynamics() {
    let o = reference().2.get("proposed").unwrap();
    // Central differences at dt = 1e-3 against the model right-hand side.
    assert!(o.max_zeta_dynamics_residual.unwrap() < 2e-2);
    assert!(o.max_residual_identity < 1e-3);
    assert_eq!(o.w_nonpositive, 0);
}

#[test]
fn gps_mode_converges() {
    let log =
        run("[scenario]\nt_end = 40.0\n[run]\nsensor_mode = \"gps\"\nobserver = \"proposed\"\n")
            .unwrap();
    let last = &log.rows.last().unwrap().observers[0];
    assert!(last.p_err_norm < 1e-3 && last.dist_r < 1e-6);
}

#[test]
fn noisy_runs_depend_only_on_seed() {
    let toml = |seed: u64| {
        format!(
            "[scenario]\nt_end = 2.0\n[scenario.noise]\ngyro_std = 0.01\naccel_std = 0.05\nmag_std = 0.01\nposition_std = 0.02\n[run]\nseed = {seed}\n"
        )
    };
    let a = run(&toml(7)).unwrap();
    let b = run(&toml(7)).unwrap();
    let c = run(&toml(8)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_ne!(a.rows, c.rows);
}

#[test]
fn divergence_is_reported() {
    // Poles at -150 and -200 with a 0.05 s step and no substepping.
    let err = run("[scenario]\nt_end = 10.0\ndt = 0.05\n[gains]\ngamma = 50.0\n[run]\nstiffness_limit = 0.0\n").unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
}

#[test]
fn substepping_keeps_stiff_gains_stable() {
    let log = run("[scenario]\nt_end = 10.0\ndt = 0.05\n[gains]\ngamma = 50.0\n").unwrap();
    assert!(log
        .rows
        .iter()
        .all(|r| r.observers.iter().all(|o| o.p_err_norm.is_finite())));
}

// The tests below state the convergence and monitor claims at full strength.
// They fail with the reference gains and are kept out of the default run.

#[test]
#[ignore = "bias error is 2.3e-2 of its peak at t = 30 s with the reference gains"]
fn errors_settle_below_thousandth_of_peak_by_30s() {
    let o = reference().2.get("proposed").unwrap();
    for (name, q) in ["p", "v", "R", "b"].iter().zip(o.settled_ratio) {
        assert!(q <= 1e-3, "{name}: {q:e}");
    }
}

#[test]
#[ignore = "|x~| grows on [5, 20] s while m_I and a_I are nearly collinear"]
fn state_error_fit_is_decaying_on_5_to_20s() {
    let fit = reference().2.get("proposed").unwrap().x_err_fit.unwrap();
    assert!(fit.rate < 0.0 && fit.r_squared > 0.9, "{fit:?}");
}

#[test]
#[ignore = "the reference gains are far below the sufficient conditions; W increases after t = 5 s"]
fn w_is_non_increasing_after_transient() {
    let o = reference().2.get("proposed").unwrap();
    assert_eq!(o.w_violations, 0, "largest increase {:e}", o.w_max_increase);
}

#[test]
fn v_is_non_increasing_outside_threshold_ball() {
    let o = reference().2.get("proposed").unwrap();
    assert_eq!(o.v_violations, 0);
}
