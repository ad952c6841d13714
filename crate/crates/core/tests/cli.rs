use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn emdstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emdstream"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const STREAM: &str = "# two sites\n+ S 1 1\n+ S 5 5 2\n+ T 2 1\n+ T 5 7 2\n";
const TURNSTILE: &str = "+ S 1 1\n+ S 9 9\n+ S 5 5 2\n+ T 2 1\n- S 9 9\n+ T 5 7 2\n";

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn estimate_every_algorithm() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "s.txt", STREAM);
    let turnstile = write(&dir, "t.txt", TURNSTILE);
    for alg in ["exact", "coreset", "multigrid", "baseline", "combined"] {
        let out = emdstream(&["estimate", "--delta", "16", "--algorithm", alg, "--stream", &stream]);
        if alg != "coreset" {
            let again = emdstream(&["estimate", "--delta", "16", "--algorithm", alg, "--stream", &turnstile]);
            let w: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
            let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            assert_eq!(w["estimate"], v["estimate"], "{alg}");
        }
        assert_eq!(out.status.code(), Some(0), "{alg}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["schema"], "emdstream.report/1");
        assert_eq!(v["n_s"], 3);
        assert_eq!(v["exact"], 5.0);
        assert!(v["estimate"].as_f64().unwrap() > 0.0);
        assert!(v.get("wall_time_ms").is_none());
    }
}

#[test]
fn reports_replay_byte_identical() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "s.txt", STREAM);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = emdstream(&[
            "estimate", "--delta", "16", "--seed", "9", "--epsilon", "0.3", "--delta-prob", "0.1",
            "--grids-per-level", "3", "--stream", &stream, "--report", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(json(&a)["config"]["grids_per_level"], 3);
}

#[test]
fn timing_is_opt_in() {
    let dir = TempDir::new().unwrap();
    let stream = write(&dir, "s.txt", STREAM);
    let out = emdstream(&["estimate", "--delta", "16", "--algorithm", "exact", "--stream", &stream, "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["wall_time_ms"].as_f64().is_some());
}

#[test]
fn parse_and_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "+ S 1 1\n* T 2 2\n");
    let outside = write(&dir, "out.txt", "+ S 1 17\n+ T 1 1\n");
    let ok = write(&dir, "ok.txt", STREAM);
    for args in [
        vec!["estimate", "--delta", "16", "--stream", bad.as_str()],
        vec!["estimate", "--delta", "16", "--stream", outside.as_str()],
        vec!["estimate", "--delta", "15", "--stream", ok.as_str()],
        vec!["estimate", "--delta", "16", "--epsilon", "1.5", "--stream", ok.as_str()],
        vec!["estimate", "--delta", "16", "--algorithm", "bogus", "--stream", ok.as_str()],
        vec!["estimate", "--delta", "16"],
        vec!["frobnicate"],
    ] {
        let out = emdstream(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn model_violations_exit_3() {
    let dir = TempDir::new().unwrap();
    let unequal = write(&dir, "u.txt", "+ S 1 1\n+ S 2 2\n+ T 3 3\n");
    let negative = write(&dir, "n.txt", "+ S 1 1\n- S 1 1\n- S 1 1\n+ T 2 2\n");
    let deletion = write(&dir, "d.txt", "+ S 1 1\n+ S 4 4\n- S 4 4\n+ T 2 2\n");
    let sites = write(&dir, "k.txt", "+ S 1 1\n+ S 1 2\n+ T 3 3\n+ T 4 4\n");
    for args in [
        vec!["estimate", "--delta", "8", "--stream", unequal.as_str()],
        vec!["estimate", "--delta", "8", "--algorithm", "exact", "--stream", negative.as_str()],
        vec!["estimate", "--delta", "8", "--algorithm", "coreset", "--stream", deletion.as_str()],
        vec!["estimate", "--delta", "8", "--algorithm", "coreset", "--k", "1", "--stream", sites.as_str()],
    ] {
        let out = emdstream(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn capkmedian_exact_finds_optimum() {
    let dir = TempDir::new().unwrap();
    let pts = write(&dir, "p.txt", "+ S 1 1\n+ S 1 2\n+ S 4 4\n+ S 4 3\n");
    let report = dir.path().join("cap.json");
    let out = emdstream(&[
        "capkmedian", "--delta", "4", "--k", "2", "--capacity", "2", "--estimator", "exact",
        "--stream", &pts, "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&report);
    assert_eq!(v[0]["exact_cost"], 2.0);

    let out = emdstream(&["capkmedian", "--delta", "4", "--k", "2", "--capacity", "1", "--stream", &pts]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn experiment_and_verify_claims_run() {
    let out = emdstream(&[
        "experiment", "--delta", "16", "--instances", "3", "--n-max", "20", "--grids-per-level", "2",
        "--epsilon", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);

    let out = emdstream(&["experiment", "--suite", "min-grid", "--delta", "16", "--instances", "2", "--n-max", "20"]);
    assert_eq!(out.status.code(), Some(0));

    let out = emdstream(&[
        "verify-claims", "--delta", "16", "--instances", "3", "--shifts", "100", "--n-max", "20",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stderr).matches("PASS").count(), 7);
}
