use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn relaxlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaxlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("RELAXLAB_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn shear_run_keeps_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "shear.json",
        r#"{"experiment": "mre", "mre": {"n": 32, "nu": 0, "t_final": 0.2, "initial": {"kind": "shear", "amplitude": 1}}}"#,
    );
    let o = relaxlab(tmp.path(), &["run", "--config", &cfg, "--out", "shear", "--emit-plotscript"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("shear");
    let b2 = column(&fs::read_to_string(out.join("ledger.csv")).unwrap(), "B2");
    assert_eq!(b2.len(), 201);
    assert!(b2.iter().all(|e| (e - b2[0]).abs() <= 1e-12));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config"]["mre"]["dt"], 1e-3);
    assert_eq!(m["verdicts"]["energy_balance"]["pass"], true);
    assert!(out.join("snapshots/B_00000.bin").exists());
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("'ledger.csv' using 1:i"));
}

#[test]
fn run_then_certify() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "ot.json",
        r#"{"experiment": "mre", "snap_every": 40, "mre": {"n": 32, "epsilon": 0, "mu": 1e-3, "nu": 0, "dt": 5e-4, "t_final": 0.1}}"#,
    );
    let o = relaxlab(tmp.path(), &["run", "--config", &cfg, "--out", "out/ot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = relaxlab(
        tmp.path(),
        &["certify", "--traj", "out/ot", "--r", "0,1,5", "--budget", "500", "--out", "out/cert"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert_dir = tmp.path().join("out/cert");
    for r in ["0", "1", "5"] {
        let c: Value =
            serde_json::from_str(&fs::read_to_string(cert_dir.join(format!("certificate_r{r}.json"))).unwrap()).unwrap();
        assert_eq!(c["verdict"], "pass", "r = {r}");
        assert_eq!(c["per_time"].as_array().unwrap().len(), 6);
    }
    assert!(cert_dir.join("transport.csv").exists());
    assert_eq!(manifest(&cert_dir)["status"], "ok");
}

#[test]
fn energy_bump_fails_certification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bump.json",
        r#"{"experiment": "certify", "snap_every": 50,
            "mre": {"n": 16, "epsilon": 0, "mu": 1e-2, "nu": 0, "t_final": 0.2, "initial": {"kind": "shear", "amplitude": 1}},
            "certify": {"r": [0, 1], "budget": 20, "transport": false, "bump": {"at": 0.1, "factor": 1.01}}}"#,
    );
    let o = relaxlab(tmp.path(), &["certify", "--config", &cfg, "--out", "bump"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("bump"));
    assert_eq!(m["exit_code"], 3);
    assert_eq!(m["status"], "check_failure");
    assert_eq!(m["verdicts"]["entropy_r0"]["pass"], false);
}

#[test]
fn maxwell_demo_prints_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relaxlab(tmp.path(), &["bi", "--demo", "maxwell-limit"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(column(&text, "lambda"), vec![10.0, 100.0, 1000.0]);
    let err = column(&text, "abs_error");
    assert!((err[0] - 1.2e-3).abs() < 1e-4 && (err[1] - 1.2e-5).abs() < 1e-6);
    let out = tmp.path().join("out/bi/maxwell-limit");
    assert_eq!(fs::read_to_string(out.join("maxwell_limit.csv")).unwrap(), text);
    let slope = manifest(&out)["metrics"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() <= 0.1);
}

#[test]
fn config_errors_exit_1_and_list_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"experiment": "mre", "mre": {"nu": -0.5, "nuu": 1}}"#);
    let o = relaxlab(tmp.path(), &["run", "--config", &cfg, "--out", "bad"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("mre.nu = -0.5"), "{err}");
    assert!(err.contains("did you mean \"nu\"?"), "{err}");
    assert_eq!(manifest(&tmp.path().join("bad"))["status"], "config_error");

    let o = relaxlab(tmp.path(), &["run", "--config", "missing.json", "--out", "gone"]);
    assert_eq!(o.status.code(), Some(1));
    let o = relaxlab(tmp.path(), &["run"]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = write(tmp.path(), "heat.json", r#"{"experiment": "bi"}"#);
    let o = relaxlab(tmp.path(), &["heat", "--config", &cfg, "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numeric_failure_exits_2_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bi.json", r#"{"experiment": "bi", "bi": {"n": 16, "dt": 0.1, "t_final": 0.2}}"#);
    let o = relaxlab(tmp.path(), &["bi", "--config", &cfg, "--out", "fail"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("fail"));
    assert_eq!(m["status"], "numeric_failure");
    assert!(m["error"].as_str().unwrap().contains("CFL"), "{}", m["error"]);
}

#[test]
fn single_threaded_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "rand.json",
        r#"{"experiment": "mre", "mre": {"n": 32, "t_final": 0.05, "initial": {"kind": "random"}}}"#,
    );
    for (out, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let o = relaxlab(tmp.path(), &["run", "--config", &cfg, "--out", out, "--seed", seed, "--threads", "1"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("ledger.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_relaxlab"))
        .args(["krtest", "--out", "kr"])
        .current_dir(tmp.path())
        .env("RELAXLAB_OUT", &root)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&root.join("kr"));
    assert_eq!(m["verdicts"]["lower_bound"]["pass"], true);
    let rows = fs::read_to_string(root.join("kr/kr.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 20 * 3);
}

#[test]
fn diffusion_and_bi_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relaxlab(tmp.path(), &["heat", "--out", "heat"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("heat/diffusion.csv")).unwrap();
    assert!(csv.starts_with("time,mass,entropy,hv_lhs,max_speed\n"));
    let cfg = write(tmp.path(), "rel.json", r#"{"experiment": "relativistic"}"#);
    let o = relaxlab(tmp.path(), &["heat", "--config", &cfg, "--out", "rel"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(manifest(&tmp.path().join("rel"))["verdicts"]["flux_speed_bound"]["pass"], true);

    let cfg = write(
        tmp.path(),
        "bi.json",
        r#"{"experiment": "bi", "bi": {"n": 16, "dt": 1e-4, "t_final": 0.005, "theta": {"kind": "abs", "delta": 0.05}}}"#,
    );
    let o = relaxlab(tmp.path(), &["bi", "--config", &cfg, "--out", "bi"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("bi"));
    assert_eq!(m["metrics"]["smoothing_delta"], 0.05);
    let snap: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("bi/snapshots/B_00000.json")).unwrap()).unwrap();
    assert_eq!(snap["schema"], "relaxlab-field-v1");
    assert_eq!(snap["components"], 3);
}

#[test]
fn sweep_writes_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sweep.json", r#"{"mre": {"n": 16, "t_final": 0.1}}"#);
    let o = relaxlab(tmp.path(), &["sweep", "--config", &cfg, "--out", "sw"]);
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let pass = manifest(&tmp.path().join("sw"))["verdicts"]["cauchy_decreasing"]["pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 3 }), "{}", stderr(&o));
}
