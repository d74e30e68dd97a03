use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hocp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hocp"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Certified small car instance used by several tests.
const CAR: &[&str] = &["solve", "turbo_car", "--n", "25", "--drag", "1e-2"];

#[test]
fn missing_config_is_a_usage_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(tmp.path(), &["solve", "turbo_car", "--config", "absent.json", "--out", "run"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.json"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn bad_flags_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hocp(tmp.path(), &["solve", "turbo_car", "--tv-bound", "3"])), 1);
    assert_eq!(code(&hocp(tmp.path(), &["solve", "fishing", "--drag", "1e-3"])), 1);
    assert_eq!(code(&hocp(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&hocp(tmp.path(), &["baseline", "dp"])), 1);
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("car.json"), r#"{"N": 40, "c_d": 1e-2}"#).unwrap();
    let o = hocp(tmp.path(), &["solve", "turbo_car", "--config", "car.json", "--n", "25"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = read_json(&tmp.path().join("alm/solution.json"));
    assert_eq!(sol["layout_ref"]["instance"]["config"]["N"], 25);
    assert_eq!(sol["layout_ref"]["intervals"], 25);
    let manifest = read_json(&tmp.path().join("alm/manifest.json"));
    assert_eq!(manifest["config"], "car.json");
}

#[test]
fn solve_writes_artifacts_that_check_accepts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(tmp.path(), CAR);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("alm");
    let manifest = read_json(&dir.join("manifest.json"));
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(dir.join(f.as_str().unwrap()).exists(), "{f} listed but missing");
    }
    let sol = read_json(&dir.join("solution.json"));
    assert_eq!(sol["status"], "EpsKktCritical");
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("j,mu,eps_j,viol_norm,psi,inner_iters,milp_nodes,time_ms\n"));
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 26);
    assert!(traj.starts_with("t,x1,x2,u1,u2,w1\n"));

    let o = hocp(tmp.path(), &["check", "alm/solution.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    for m in ["in_x", "psi", "normal_cone_residual", "viol_norm"] {
        assert!(out.contains(m));
    }
}

#[test]
fn solution_bytes_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hocp(tmp.path(), &[CAR, &["--out", "a"]].concat())), 0);
    assert_eq!(code(&hocp(tmp.path(), &[CAR, &["--out", "b"]].concat())), 0);
    let a = fs::read(tmp.path().join("a/solution.json")).unwrap();
    let b = fs::read(tmp.path().join("b/solution.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corrupted_solutions_fail_check() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hocp(tmp.path(), CAR)), 0);
    let mut sol = read_json(&tmp.path().join("alm/solution.json"));
    // Binary of interval 3 sits after (x1, x2, u1, u2) of each stage.
    let idx = 3 * 5 + 4;
    let w = sol["x"][idx].as_f64().unwrap();
    sol["x"][idx] = Value::from(1.0 - w);
    fs::write(tmp.path().join("flipped.json"), sol.to_string()).unwrap();
    let o = hocp(tmp.path(), &["check", "flipped.json"]);
    assert_eq!(code(&o), 2);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("FAIL"), "{out}");
    assert!(out.contains("psi") || out.contains("violation") || out.contains("not in X"), "{out}");

    sol["x"][idx] = Value::from(0.5);
    fs::write(tmp.path().join("fractional.json"), sol.to_string()).unwrap();
    let o = hocp(tmp.path(), &["check", "fractional.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not in X"));
}

#[test]
fn relaxed_solution_is_not_in_x() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(tmp.path(), &["baseline", "relax", "--problem", "turbo_car", "--n", "25", "--drag", "1e-2"]);
    assert_ne!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = read_json(&tmp.path().join("relax/solution.json"));
    let fractional = sol["x"]
        .as_array()
        .unwrap()
        .iter()
        .skip(4)
        .step_by(5)
        .take(25)
        .any(|v| (v.as_f64().unwrap() - v.as_f64().unwrap().round()).abs() > 1e-6);
    if fractional {
        let o = hocp(tmp.path(), &["check", "relax/solution.json"]);
        assert_eq!(code(&o), 2);
        assert!(String::from_utf8_lossy(&o.stdout).contains("not in X"));
    }
    let projected = read_json(&tmp.path().join("relax/projected.json"));
    assert_eq!(projected["x"].as_array().unwrap().len(), sol["x"].as_array().unwrap().len());
}

#[test]
fn cia_needs_relaxation_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(tmp.path(), &["baseline", "cia"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("relax/solution.json"));
    assert!(!tmp.path().join("cia").exists());
}

#[test]
fn relax_cia_warm_start_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(tmp.path(), &["baseline", "relax", "--problem", "turbo_car", "--n", "25", "--drag", "1e-2"]);
    assert_ne!(code(&o), 1);
    assert_eq!(code(&hocp(tmp.path(), &["baseline", "cia"])), 0);
    let cia = read_json(&tmp.path().join("cia/solution.json"));
    for v in cia["x"].as_array().unwrap().iter().skip(4).step_by(5).take(25) {
        let v = v.as_f64().unwrap();
        assert!(v == 0.0 || v == 1.0);
    }
    let o = hocp(tmp.path(), &[CAR, &["--warm-start", "cia/solution.json", "--out", "warm"]].concat());
    assert_ne!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("warm/solution.json").exists());
}

#[test]
fn refine_never_increases_the_objective() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hocp(tmp.path(), CAR)), 0);
    let o = hocp(tmp.path(), &["baseline", "refine"]);
    assert_ne!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let before = read_json(&tmp.path().join("alm/solution.json"))["objective"].as_f64().unwrap();
    let after = read_json(&tmp.path().join("refine/solution.json"))["objective"].as_f64().unwrap();
    assert!(after <= before, "{after} > {before}");
}

#[test]
fn dp_writes_a_readable_value_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hocp"))
        .args([
            "baseline",
            "dp",
            "--problem",
            "turbo_car",
            "--n",
            "10",
            "--state-points",
            "11",
            "--control-points",
            "5",
        ])
        .current_dir(tmp.path())
        .env("HOCP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(tmp.path().join("dp/value_table.bin")).unwrap();
    let table = hocp::baselines::ValueTable::read_from(bytes.as_slice()).unwrap();
    assert_eq!(table.stages, 11);
    assert_eq!(table.nodes(), 121);
    let manifest = read_json(&tmp.path().join("dp/manifest.json"));
    assert_eq!(manifest["parameters"]["dp"]["threads"], 2);

    let o = Command::new(env!("CARGO_BIN_EXE_hocp"))
        .args(["baseline", "dp", "--problem", "turbo_car", "--n", "10"])
        .current_dir(tmp.path())
        .env("HOCP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_has_one_row_per_size() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hocp(
        tmp.path(),
        &["bench-runtime", "turbo_car", "--drag", "1e-2", "--n-list", "10,12", "--reps", "1"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("bench/runtime.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,alm_ms,refine_ms,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,"));
    assert!(lines[2].starts_with("12,"));
    assert!(tmp.path().join("bench/runtime.svg").exists());
}
