use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixchar"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TS: &str = r#"{"type":"matrix","P":[[0,1],[1,0]]}"#;

#[test]
fn analyze_two_state() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "ts.json", TS);
    let out = dir.path().join("report.json");
    let o = run(bin().args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2,rho,kappa,c_ls", "--out"]).arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["schema"], "mixchar/1");
    let q = &r["quantities"];
    let ln2 = std::f64::consts::LN_2;
    for (k, v) in [("tau2", ln2 / 2.0), ("rho", (4.0f64 / 3.0).ln()), ("kappa", ln2), ("c_ls", 1.0)] {
        assert!((q[k].as_f64().unwrap() - v).abs() < 1e-8, "{k}");
    }
    assert!(r["constants"]["c_prime"].as_f64().unwrap() > 1.0);
    assert!(r["diagnostics"]["c_ls"]["limit"].as_bool().unwrap());
    assert!(r.get("timings_ms").is_none());
}

#[test]
fn analyze_reports_family_completeness() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "c3.json", r#"{"type":"family","name":"cycle","params":{"n":3}}"#);
    let out = dir.path().join("r.json");
    let o = run(bin().args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "rho", "--out"]).arg(&out));
    assert!(o.status.success());
    assert_eq!(json(&out)["family"]["complete"], true);
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "p4.json", r#"{"type":"family","name":"path","params":{"n":4}}"#);
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("r{i}.json"));
            let o = run(bin().args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2,kappa,c_ls,tree", "--seed", "5", "--out"]).arg(&out));
            assert!(o.status.success());
            fs::read_to_string(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn malformed_spec_exits_2_with_position() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "bad.json", "{\"type\": \"matrix\",\n  \"P\": [[0, 1], [1 0]]}");
    let o = run(bin().args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2"]));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn reducible_and_unknown_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "red.json", r#"{"type":"matrix","P":[[1,0],[0,1]]}"#);
    let o = run(bin().args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2"]));
    assert_eq!(o.status.code(), Some(2));
    let ts = write(&dir, "ts.json", TS);
    let o = run(bin().args(["analyze", "--chain"]).arg(&ts).args(["--quantities", "bogus"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(bin().args(["verify", "--chain"]).arg(&ts).args(["--suite", "bogus"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_two_state_core_passes() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "ts.json", TS);
    let out = dir.path().join("v.json");
    let o = run(bin().args(["verify", "--chain"]).arg(&spec).args(["--suite", "core", "--out"]).arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["failed"], 0);
    for rec in r["records"].as_array().unwrap() {
        assert_eq!(rec["chain"], "ts");
        assert!(!rec["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn verify_periodic_discrete_reports_not_mixing() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "ts.json", TS);
    let out = dir.path().join("v.json");
    let o = run(bin().args(["verify", "--chain"]).arg(&spec).args(["--suite", "discrete", "--out"]).arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let recs = json(&out)["records"].as_array().unwrap().clone();
    let lower = recs.iter().find(|r| r["id"] == "disc-lower-tau2").unwrap();
    assert_eq!(lower["status"], "report-only");
    assert!(lower["note"].as_str().unwrap().starts_with("NotMixing"));
    assert!(recs.iter().filter(|r| r["id"] == "ave-rho-le-tau2").all(|r| r["status"] == "pass"));
}

#[test]
fn verify_failure_exits_1() {
    // Slack -1 demands a margin of one on every inequality; tight ones cannot meet it.
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "ts.json", TS);
    let o = run(bin().args(["verify", "--chain"]).arg(&spec).args(["--suite", "core", "--slack=-1"]));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(bin().args(["sweep", "--family", "cycle", "--param-range", "3..5", "--quantities", "tau2,kappa", "--out"]).arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["family", "n", "tau2", "kappa"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let tau2: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(tau2[0] < tau2[1] && tau2[1] < tau2[2]);
}

#[test]
fn sweep_rejects_bad_range() {
    let o = run(bin().args(["sweep", "--family", "cycle", "--param-range", "5..3", "--quantities", "tau2"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_cap_is_honoured_and_validated() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "ts.json", TS);
    let o = run(bin().env("MIXCHAR_THREADS", "1").args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2"]));
    assert!(o.status.success());
    let o = run(bin().env("MIXCHAR_THREADS", "zero").args(["analyze", "--chain"]).arg(&spec).args(["--quantities", "tau2"]));
    assert_eq!(o.status.code(), Some(2));
}
