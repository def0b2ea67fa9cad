use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dcop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = dcop(&full);
    let v = serde_json::from_slice(&out.stdout).expect("json on stdout");
    (out.status.code().unwrap(), v)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_bundled() {
    for name in ["case1", "case2"] {
        let (code, v) = json(&["validate", name]);
        assert_eq!(code, 0);
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn oracle_case2() {
    let (code, v) = json(&["oracle", "case2"]);
    assert_eq!(code, 0);
    let mu = v["mu"][0].as_f64().unwrap();
    assert!((mu - 3.994285714285714).abs() < 1e-9);
    assert_eq!(v["active_set"].as_array().unwrap().len(), 4);
    assert!(v["kkt"]["max_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn hurwitz_case1() {
    let (code, v) = json(&["hurwitz", "case1"]);
    assert_eq!(code, 0);
    assert_eq!(v["dimension"], 2 * 8 * 2 + 2 * 2 * 7);
    assert!(v["spectral_abscissa"].as_f64().unwrap() < -1e-6);
}

#[test]
fn run_writes_csv_and_kkt_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let csv_s = csv.to_str().unwrap();
    let (code, v) = json(&["run", "case1", "--t-final", "50", "--out", csv_s]);
    assert_eq!(code, 0);
    assert_eq!(v["steps"], 10_000);
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    for i in 1..=8 {
        assert!(header.contains(&format!("mu[{i}][1]").as_str()));
        assert!(header.contains(&format!("mu[{i}][2]").as_str()));
    }
    assert_eq!(header.last(), Some(&"kkt_max"));
    assert_eq!(text.lines().count(), 10_000 / 100 + 2);

    let (code, k) = json(&["kkt", "case1", "--state", csv_s]);
    assert_eq!(code, 0);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    let recorded: f64 = last.last().unwrap().parse().unwrap();
    let recomputed = k["max_residual"].as_f64().unwrap();
    assert!((recorded - recomputed).abs() <= 1e-12 * recorded.max(1.0));
}

#[test]
fn reduced_mode_has_no_estimator_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = dcop(&["run", "case2", "--mode", "reduced", "--t-final", "1", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(!text.lines().next().unwrap().contains("xi_h"));
}

#[test]
fn overrides_are_revalidated() {
    let out = dcop(&["run", "case2", "--dt", "0.05"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability limit"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dcop(&["validate", "missing.json"]).status.code(), Some(3));

    let broken = write(dir.path(), "broken.json", "{\"n\": 2,");
    assert_eq!(dcop(&["validate", &broken]).status.code(), Some(3));

    let mut v: Value = serde_json::from_str(dcop::scenario::CASE2).unwrap();
    v.as_object_mut().unwrap().remove("edges");
    let no_edges = write(dir.path(), "no_edges.json", &v.to_string());
    let out = dcop(&["validate", &no_edges]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edges"));

    let mut v: Value = serde_json::from_str(dcop::scenario::CASE2).unwrap();
    v["objectives"][1]["a"] = 0.0.into();
    let flat = write(dir.path(), "flat.json", &v.to_string());
    let out = dcop(&["validate", &flat]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strict convexity"));

    // cutting edge 2-5 splits the graph: a standing assumption fails
    let mut v: Value = serde_json::from_str(dcop::scenario::CASE2).unwrap();
    v["edges"].as_array_mut().unwrap().retain(|e| e != &serde_json::json!([2, 5]));
    let split = write(dir.path(), "split.json", &v.to_string());
    let (code, report) = json(&["validate", &split]);
    assert_eq!(code, 1);
    assert_eq!(report["checks"]["connectivity"]["passed"], false);
    assert_eq!(dcop(&["run", &split, "--t-final", "1"]).status.code(), Some(1));
    assert_eq!(dcop(&["hurwitz", &split]).status.code(), Some(1));
}

#[test]
fn divergence_exits_numerical() {
    // positive-definite cost but an enormous gain makes the explicit step blow up
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(dcop::scenario::CASE1).unwrap();
    v["gains"]["kx"] = 1e6.into();
    v["gains"]["epsilon"] = 1.0.into();
    let path = write(dir.path(), "stiff.json", &v.to_string());
    let out = dcop(&["run", &path, "--t-final", "10"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_rows() {
    let (code, v) = json(&["sweep", "case2", "--epsilons", "0.2,0.1", "--tau-final", "2"]);
    assert_eq!(code, 0);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["ok"], true);
        assert!((r["slow_time"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    }
}
