//! Config files, CSV schema and emitted artifacts.

use posnav::harness::{
    analyze, csv_header, emit_artifacts, load_config, run_scenario, write_csv, CheckWindows,
    RunConfig, Summary,
};

const SCHEMA: &str = "t,p_x,p_y,p_z,v_x,v_y,v_z,\
proposed_p_hat_x,proposed_p_hat_y,proposed_p_hat_z,proposed_v_hat_x,proposed_v_hat_y,proposed_v_hat_z,\
proposed_euler_err_roll,proposed_euler_err_pitch,proposed_euler_err_yaw,proposed_dist_R,\
proposed_b_hat_x,proposed_b_hat_y,proposed_b_hat_z,proposed_tilde_b_norm,proposed_sigma_R_norm,\
proposed_sat_active,proposed_zeta_norm,proposed_V,proposed_W,\
adhoc_p_hat_x,adhoc_p_hat_y,adhoc_p_hat_z,adhoc_v_hat_x,adhoc_v_hat_y,adhoc_v_hat_z,\
adhoc_euler_err_roll,adhoc_euler_err_pitch,adhoc_euler_err_yaw,adhoc_dist_R,\
adhoc_b_hat_x,adhoc_b_hat_y,adhoc_b_hat_z,adhoc_tilde_b_norm,adhoc_sigma_R_norm,\
adhoc_sat_active,adhoc_zeta_norm,adhoc_V,adhoc_W";

fn short_run() -> (RunConfig, posnav::harness::RunLog) {
    let cfg = RunConfig::from_toml("[scenario]\nt_end = 1.0\ndt = 0.01\n").unwrap();
    let log = run_scenario(&cfg).unwrap();
    (cfg, log)
}

#[test]
fn csv_header_matches_schema() {
    let (_, log) = short_run();
    assert_eq!(csv_header(&log), SCHEMA);
}

#[test]
fn csv_rows_have_fixed_width_numbers() {
    let (_, log) = short_run();
    let mut buf = Vec::new();
    write_csv(&log, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 101);
    let columns = SCHEMA.split(',').count();
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), columns);
        for (name, f) in SCHEMA.split(',').zip(&fields) {
            if name.ends_with("sat_active") {
                assert!(*f == "0" || *f == "1");
            } else {
                let mantissa = f.trim_start_matches('-').split('e').next().unwrap();
                assert_eq!(mantissa.len(), 18, "{name} = {f}");
                f.parse::<f64>().unwrap();
            }
        }
    }
    assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
}

#[test]
fn artifacts_are_written() {
    let (cfg, log) = short_run();
    let checks = analyze(&log, CheckWindows::for_horizon(cfg.scenario.t_end));
    let summary = Summary::new(&log, &cfg, checks);
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_artifacts(&log, &summary, dir.path()).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "run.csv",
            "summary.json",
            "trajectory.svg",
            "position_error.svg",
            "velocity_error.svg",
            "euler_error.svg",
            "bias_error.svg"
        ]
    );
    for p in &paths {
        assert!(std::fs::metadata(p).unwrap().len() > 0);
    }
    let svg = std::fs::read_to_string(dir.path().join("euler_error.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn summary_reports_bounds_and_fits() {
    let cfg =
        RunConfig::from_toml("[scenario]\nt_end = 25.0\n[run]\nobserver = \"proposed\"\n").unwrap();
    let log = run_scenario(&cfg).unwrap();
    let checks = analyze(&log, CheckWindows::for_horizon(cfg.scenario.t_end));
    let json: serde_json::Value =
        serde_json::from_str(&Summary::new(&log, &cfg, checks).to_json().unwrap()).unwrap();
    let obs = &json["checks"]["observers"][0];
    assert_eq!(obs["observer"], "proposed");
    assert!(obs["x_err_fit"]["rate"].as_f64().unwrap().is_finite());
    assert_eq!(obs["x_err_fit"]["samples"], 15001);
    let bounds = &json["bounds"];
    for key in ["mu_max", "k_r_min", "gamma_min"] {
        assert!(bounds[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert_eq!(json["config"]["gains"]["k_r"], 2.0);
    assert!(json["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("c_hat2")));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[scenario]\nt_end = 3.0\nanchors = [[0,0,0],[1,0,0],[0,1,0],[0,0,1]]\n[gains]\nk_r = 4.0\n",
    )
    .unwrap();
    let cfg = load_config(Some(&path)).unwrap();
    assert_eq!(cfg.scenario.t_end, 3.0);
    assert_eq!(cfg.gains.k_r, 4.0);
    assert_eq!(cfg.scenario.anchors.len(), 4);
    assert!(load_config(Some(&dir.path().join("missing.toml"))).is_err());
}
