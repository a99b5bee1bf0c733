//! Binary-level tests: exit codes, machine-readable errors, output files,
//! determinism across thread counts, and the bundled scenarios.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use afcdd_cli::config::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afcdd"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("afcdd-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stderr_category(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or("");
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v["category"].as_str().map(String::from))
        .unwrap_or_default()
}

#[test]
fn check_config_passes_at_reference_point() {
    let out = bin().arg("check-config").output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"all_pass\": true"), "{text}");
}

#[test]
fn strict_mode_fails_weak_field() {
    let dir = work_dir("strict");
    let cfg = write_config(&dir, "weak.toml", "[physics]\nfield_mt = 2.0\n");
    let out = bin()
        .args(["check-config", "--strict", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    assert_eq!(stderr_category(&out), "constraint");
}

#[test]
fn schema_violation_exits_2() {
    let dir = work_dir("schema");
    let cfg = write_config(&dir, "bad.toml", "[physics]\nsigma_khz = 1.0\n");
    let out = bin()
        .args(["check-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert_eq!(stderr_category(&out), "config");
}

#[test]
fn empty_grid_exits_2() {
    let dir = work_dir("grid");
    let cfg = write_config(
        &dir,
        "empty.toml",
        "[sequence]\nn = 2\ntau_grid_ms = []\n[ensemble]\nseed = 1\nn_traj = 100\n",
    );
    let out = bin()
        .args(["sweep-fixed-n", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_reproduce_name_exits_2() {
    let out = bin().args(["reproduce", "fig99"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn sweep_csv_is_byte_identical_across_thread_counts() {
    let dir = work_dir("determinism");
    let cfg = write_config(
        &dir,
        "sweep.toml",
        "[sequence]\nkind = \"xy4\"\ntau_ms = 2.0\nn_grid = [4, 8, 12, 16]\n\
         [physics]\nepsilon_rad = 0.1\n[ensemble]\nseed = 31\nn_traj = 800\n",
    );
    let run = |threads: &str, out_name: &str| -> Vec<u8> {
        let out_dir = dir.join(out_name);
        let status = bin()
            .args(["sweep-fixed-tau", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out_dir)
            .env("AFCDD_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success(), "{status:?}");
        fs::read(out_dir.join("curve.csv")).unwrap()
    };
    let one = run("1", "t1");
    let two = run("2", "t2");
    let again = run("2", "t2b");
    assert_eq!(one, two, "thread count changed the CSV bytes");
    assert_eq!(two, again, "rerun changed the CSV bytes");
}

#[test]
fn summary_config_echo_reparses_equal() {
    let dir = work_dir("echo");
    let cfg_path = write_config(
        &dir,
        "sim.toml",
        "[sequence]\nkind = \"xy8\"\nn_s = 1\ntau_ms = 2.5\n[physics]\nepsilon_rad = 0.154\n\
         [ensemble]\nseed = 11\nn_traj = 200\ninitial_phase = \"scrambled\"\n",
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let first: RunConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    let second: RunConfig = serde_json::from_value(serde_json::to_value(&first).unwrap()).unwrap();
    assert_eq!(first, second);
    assert_eq!(summary["seed"], serde_json::json!(11));
    assert!(summary["results"]["data"]["eta_spin"].is_number());
}

#[test]
fn fit_subcommand_round_trips_a_sweep() {
    let dir = work_dir("fit");
    let sweep_cfg = write_config(
        &dir,
        "sweep.toml",
        "[sequence]\nn = 2\ntau_grid_ms = [2, 4, 6, 8, 11, 14, 17, 20]\n\
         [ensemble]\nseed = 7\nn_traj = 2000\n",
    );
    let out_dir = dir.join("out");
    let out = bin()
        .args(["sweep-fixed-n", "--config"])
        .arg(&sweep_cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");

    let fit_cfg = write_config(
        &dir,
        "fit.toml",
        &format!(
            "[fit]\nmodel = \"stretched\"\n[io]\ninput_csv = \"{}\"\nout_dir = \"{}\"\n",
            out_dir.join("curve.csv").display(),
            out_dir.display()
        ),
    );
    let out = bin()
        .args(["fit", "--config"])
        .arg(&fit_cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["converged"], serde_json::json!(true));
    let t2 = fit["params"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "t2_s")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((0.03..0.06).contains(&t2), "T2 = {t2}");
}

#[test]
fn reproduce_fig4_reports_total_efficiency_in_band() {
    let dir = work_dir("fig4");
    let out = bin()
        .args([
            "reproduce",
            "fig4",
            "--n-traj",
            "2000",
            "--seed",
            "5",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("fig4_decay.csv")).unwrap();
    let first_row = csv
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with('t'))
        .unwrap();
    let eta_tot: f64 = first_row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((0.035..=0.039).contains(&eta_tot), "eta_tot = {eta_tot}");
}

#[test]
fn reproduce_fig5_power_law_in_band() {
    let dir = work_dir("fig5");
    let out = bin()
        .args([
            "reproduce",
            "fig5",
            "--n-traj",
            "2000",
            "--seed",
            "5",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    for n in [2, 4, 8, 16] {
        assert!(dir.join(format!("fig5_n{n}.csv")).exists());
    }
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("fig5_power_law.json")).unwrap())
            .unwrap();
    let gamma = fit["params"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "gamma")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((0.60..=0.73).contains(&gamma), "gamma = {gamma}");
}

#[test]
fn reproduce_fig6a_contains_pulse_error_model_column() {
    let dir = work_dir("fig6a");
    let out = bin()
        .args([
            "reproduce",
            "fig6a",
            "--n-traj",
            "100",
            "--seed",
            "5",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    for kind in ["xx", "xy4", "xy8"] {
        let csv = fs::read_to_string(dir.join(format!("fig6a_{kind}.csv"))).unwrap();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(
            header,
            "tau_s,t2_s,t2_err_s,t2_pulse_model_s,t2_ou_model_s,t2_combined_s"
        );
    }
    // the dashed-line model column: T2 = 2 sqrt(2) tau / eps at eps = 0.154
    let csv = fs::read_to_string(dir.join("fig6a_xx.csv")).unwrap();
    let row = csv
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with('t'))
        .unwrap();
    let cols: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
    let (tau, t2_pulse) = (cols[0], cols[3]);
    let expect = 2.0 * 2.0f64.sqrt() * tau / 0.154;
    assert!((t2_pulse - expect).abs() < 1e-12 * expect);
}

#[test]
fn reproduce_a3_alpha_decreases_end_to_end() {
    let dir = work_dir("a3");
    let out = bin()
        .args([
            "reproduce",
            "appendixA3",
            "--n-traj",
            "2000",
            "--seed",
            "5",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let fits: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("a3_fits.json")).unwrap()).unwrap();
    let alphas: Vec<f64> = fits
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["alpha"].as_f64().unwrap())
        .collect();
    assert!(alphas.len() == 8);
    assert!(
        alphas.first().unwrap() > alphas.last().unwrap(),
        "alpha trend {alphas:?}"
    );
}
