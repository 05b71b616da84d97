use std::path::Path;
use std::process::{Command, Output};

use cdiwm::cli::{RunConfig, CONFIG_ENV};
use serde_json::Value;

fn cdiwm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdiwm"))
        .args(args)
        .env_remove(CONFIG_ENV)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.lines().last().unwrap()).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn spectrum_csv_has_units_row_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = cdiwm(&["spectrum", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "omega_radps,S,S_binned");
    assert_eq!(lines.next().unwrap(), "rad/ps,ps/rad,ps/rad");
    assert_eq!(lines.count(), 16384);

    let meta = read_json(&dir.path().join("s.csv.meta.json"));
    let ext = meta["extinction_radps"].as_f64().unwrap();
    assert!((ext - 0.02 / 8.5e-6).abs() < 1e-9);
    assert!((ext - 2352.9).abs() < 0.05);
    assert!((meta["working_point_as"].as_f64().unwrap() - 8.51).abs() < 0.005);
    assert_eq!(meta["peaks"]["single"], false);
}

#[test]
fn zero_delay_spectrum_is_single_scaled_gaussian() {
    let o = cdiwm(&["spectrum", "--tau_as", "0", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metadata"]["peaks"]["single"], true);
    assert!(v["metadata"]["extinction_radps"].is_null());
    let p = v["metadata"]["probability"].as_f64().unwrap();
    assert!((p - 0.02f64.sin().powi(2)).abs() < 1e-15);
    let peak = v["metadata"]["peaks"]["low_radps"].as_f64().unwrap();
    assert!((peak - 2350.0).abs() < 1e-3);
}

#[test]
fn timedomain_reports_dark_center_and_parseval() {
    let o = cdiwm(&["timedomain", "--tau_as", "8.51063829787234", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m = &v["metadata"];
    assert!(m["T_origin"].as_f64().unwrap() < 1e-10 * m["T_peak"].as_f64().unwrap());
    assert!(m["parseval_relative_error"].as_f64().unwrap() < 1e-6);
    assert!(m["analytic_l2_relative_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["columns"], serde_json::json!(["t_as", "T"]));
}

#[test]
fn timedomain_off_working_point_fills_the_center() {
    let o = cdiwm(&["timedomain", "--tau_as", "7.5", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m = &v["metadata"];
    let ratio = m["T_origin"].as_f64().unwrap() / m["T_peak"].as_f64().unwrap();
    // sin^2(omega0 tau - eps) sets the center level relative to the lobes
    assert!(ratio > 1e-3, "{ratio}");
    // still even: t -> -t swaps the two delayed replicas
    let rows = v["rows"].as_array().unwrap();
    let c = rows.len() / 2;
    for k in [10, 40, 200] {
        let (a, b) = (rows[c - k][1].as_f64().unwrap(), rows[c + k][1].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-9 * a.max(b));
    }
}

#[test]
fn sweep_column_order_and_magnitudes() {
    let o = cdiwm(&["sweep", "--from", "7.5", "--to", "9.5", "--n", "41", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        v["columns"],
        serde_json::json!([
            "var",
            "mean_shift",
            "peak_low",
            "peak_high",
            "shift_rate",
            "P_exact",
            "P_swm_approx",
            "P_cdiwm_approx",
            "res_swm",
            "res_cdiwm"
        ])
    );
    assert!(v["metadata"]["max_abs_mean_shift_radps"].as_f64().unwrap() > 100.0);
}

#[test]
fn epsilon_sweep_probabilities_follow_approximations() {
    let run = |at: &str| -> Vec<Vec<f64>> {
        let o = cdiwm(&[
            "sweep", "--var", "epsilon", "--from", "0.001", "--to", "0.05", "--n", "11", "--at", at, "--format", "json",
        ]);
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
            .collect()
    };
    for r in run("working") {
        assert!((r[5] - r[7]).abs() < 1e-3 * r[7], "{r:?}");
    }
    for r in run("zero") {
        assert!((r[5] - r[6]).abs() < 1e-3 * r[6], "{r:?}");
    }
}

#[test]
fn sweep_through_zero_probability_warns_instead_of_failing() {
    let o = cdiwm(&[
        "sweep", "--var", "epsilon", "--at", "zero", "--from", "0", "--to", "0.01", "--n", "3",
    ]);
    assert!(o.status.success());
    let data = stdout(&o);
    assert!(data.lines().nth(2).unwrap().starts_with("0e0,NaN"));
    assert!(String::from_utf8(o.stderr).unwrap().contains("warning"));
}

#[test]
fn rerun_is_byte_identical() {
    for args in [
        vec!["spectrum"],
        vec!["sweep", "--n", "21"],
        vec!["resolve", "--trials", "20", "--seed", "3"],
    ] {
        let a = cdiwm(&args);
        let b = cdiwm(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn seed_changes_monte_carlo_output() {
    let a = cdiwm(&["resolve", "--trials", "20", "--seed", "3"]);
    let b = cdiwm(&["resolve", "--trials", "20", "--seed", "4"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, "# test\nepsilon_rad = 0.03\nosa.resolution_nm = 0.02\n").unwrap();
    let out = dir.path().join("t.csv");
    let o = cdiwm(&[
        "spectrum",
        "--config",
        cfg_path.to_str().unwrap(),
        "--tau_as",
        "12.25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let meta = read_json(&dir.path().join("t.csv.meta.json"));
    let echoed = meta["config"].as_str().unwrap();
    let parsed = RunConfig::parse(echoed).unwrap();
    assert_eq!(parsed.epsilon_rad, 0.03);
    assert_eq!(parsed.osa.resolution_nm, 0.02);
    assert_eq!(parsed.tau_as, 12.25);
    assert_eq!(parsed.to_text(), echoed);

    // feeding the echo back reproduces the table exactly
    let echo_path = dir.path().join("echo.cfg");
    std::fs::write(&echo_path, echoed).unwrap();
    let out2 = dir.path().join("t2.csv");
    let o = cdiwm(&[
        "spectrum",
        "--config",
        echo_path.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn environment_supplies_default_config_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("env.cfg");
    std::fs::write(&cfg_path, "tau_as = 3\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["spectrum", "--format", "json"];
        args.extend_from_slice(extra);
        let o = Command::new(env!("CARGO_BIN_EXE_cdiwm"))
            .args(&args)
            .env(CONFIG_ENV, &cfg_path)
            .output()
            .unwrap();
        assert!(o.status.success());
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        RunConfig::parse(v["metadata"]["config"].as_str().unwrap()).unwrap()
    };
    assert_eq!(run(&[]).tau_as, 3.0);
    assert_eq!(run(&["--tau_as", "4"]).tau_as, 4.0);

    let other = dir.path().join("other.cfg");
    std::fs::write(&other, "epsilon_rad = 0.01\n").unwrap();
    let c = run(&["--config", other.to_str().unwrap()]);
    assert_eq!(c.tau_as, 8.5);
    assert_eq!(c.epsilon_rad, 0.01);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "osa.resolutoin_nm = 0.02\n").unwrap();
    for args in [
        vec!["spectrum", "--config", bad.to_str().unwrap()],
        vec!["spectrum", "--no_such_key", "1"],
        vec!["spectrum", "--delta_thz", "-5"],
        vec!["spectrum", "--epsilon_rad", "2"],
        vec!["spectrum", "--time.n_points", "1000"],
        vec!["spectrum", "--config", "/nonexistent/run.cfg"],
        vec!["sweep", "--n", "1"],
        vec!["figures", "fig3"],
    ] {
        let o = cdiwm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(error_json(&o)["error"], "config", "{args:?}");
    }
}

#[test]
fn numerical_domain_errors_exit_3() {
    // 8 transform points cannot hold the band: aliasing guard
    let o = cdiwm(&["timedomain", "--time.n_points", "8"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "numerical");
}

#[test]
fn zero_photons_exit_4() {
    let o = cdiwm(&["resolve", "--photons", "0"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&o)["error"], "estimation");
}

#[test]
fn resolve_thresholds_near_limits() {
    let o = cdiwm(&["resolve", "--trials", "0", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let m = &v["metadata"];
    let cd = m["cdiwm"]["deterministic_threshold_as"].as_f64().unwrap();
    let sw = m["swm"]["deterministic_threshold_as"].as_f64().unwrap();
    assert!(cd / 5.33e-5 < 3.0 && cd / 5.33e-5 > 1.0 / 3.0);
    assert!(sw / 1.472e-2 < 3.0 && sw / 1.472e-2 > 1.0 / 3.0);
    assert!(m["cdiwm"]["monte_carlo"].is_null());
    assert_eq!(v["rows"].as_array().unwrap().len(), 17);
}

#[test]
fn figures_write_one_file_per_table() {
    let dir = tempfile::tempdir().unwrap();
    for (fig, expected) in [("fig1", 10), ("fig2", 3), ("fig4", 3), ("fig5", 2)] {
        let out = dir.path().join(fig);
        let o = cdiwm(&["figures", fig, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{fig}");
        let csvs = std::fs::read_dir(&out)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count();
        assert_eq!(csvs, expected, "{fig}");
    }
    let fig4 = std::fs::read_to_string(dir.path().join("fig4/fig4_inset.csv")).unwrap();
    assert!(fig4.lines().nth(2).unwrap().starts_with("7.5e0,"));
}

#[test]
fn figures_to_stdout_use_separators() {
    let o = cdiwm(&["figures", "fig5"]);
    let text = stdout(&o);
    let names: Vec<&str> = text.lines().filter(|l| l.starts_with("# ")).collect();
    assert_eq!(names, ["# fig5_cdiwm", "# fig5_swm"]);
}

#[test]
fn help_exits_zero() {
    let o = cdiwm(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("osa.resolution_nm"));
}
