use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const MEASUREMENT_HEADER: &str = "experiment,n,K,m,gamma,s_or_xi_or_lambda,measurement,envelope,fitted_slope,seed";
const COUNTER_HEADER: &str = "construction,m,p,lhs,rhs,ratio,expected,abs_error";

fn czlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_czlab")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", dir.to_str().unwrap()]);
    czlab(&all)
}

fn summary(dir: &Path, stem: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

/// Data rows of a CSV file after checking the header and the column count.
fn csv_rows(dir: &Path, stem: &str, header: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    let width = header.split(',').count();
    lines
        .map(|l| {
            let cells: Vec<String> = l.split(',').map(str::to_string).collect();
            assert_eq!(cells.len(), width, "row `{l}`");
            cells
        })
        .collect()
}

#[test]
fn appendix_b_reports_exact_norms() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["counterexample:appb", "--m", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "counterexample-appb");
    assert_eq!(s["pass"], Value::Bool(true));
    assert_eq!(s["constants"]["l1"].as_f64(), Some(8.0));
    assert_eq!(s["constants"]["l2sq"].as_f64(), Some(40.0));
    let rows = csv_rows(dir.path(), "counterexample-appb", COUNTER_HEADER);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "appendix-b");
}

#[test]
fn decomposition_audit_reports_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        run_in(dir.path(), &["decompose-audit", "--n", "1", "--K", "6", "--m", "2", "--lambda", "1.0", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "decompose-audit");
    let err = s["constants"]["reconstruction_error"].as_f64().unwrap();
    assert!(err < 1e-10, "{err}");
    assert!(s["assertions"].as_array().unwrap().iter().all(|a| a["pass"] == Value::Bool(true)));
    assert_eq!(csv_rows(dir.path(), "decompose-audit", MEASUREMENT_HEADER).len(), 5);
    assert!(dir.path().join("decompose-audit").join("manifest.json").exists());
}

#[test]
fn shifted_t1_writes_one_row_per_shift() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["shifted-t1", "--K", "10", "--s", "1..8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = csv_rows(dir.path(), "shifted-t1", MEASUREMENT_HEADER);
    assert_eq!(rows.len(), 8);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[5].parse::<f64>().unwrap(), (i + 1) as f64);
        assert!(r[6].parse::<f64>().unwrap() > 0.0);
    }
    let s = summary(dir.path(), "shifted-t1");
    assert!(s["constants"]["phi_slope"].as_f64().unwrap() < 0.0);
    assert!(s["constants"]["psi_slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn counterexample_tables_have_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["counterexample:marttransform", "--m", "5", "--p", "1,4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(dir.path(), "counterexample-marttransform", COUNTER_HEADER).len(), 2);
    let out = run_in(dir.path(), &["counterexample:lpblowup"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(dir.path(), "counterexample-lpblowup", COUNTER_HEADER);
    assert!((rows[0][3].parse::<f64>().unwrap() - 4.0).abs() < 1e-8);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["no-such-experiment"],
        vec!["decompose-audit", "--K", "99"],
        vec!["decompose-audit", "--n", "3"],
        vec!["decompose-audit", "--lambda", "0.001"],
        vec!["shifted-t1", "--K", "6", "--s", "1..9"],
        vec!["schur", "--kernel", "bogus"],
        vec!["pseudoloc-l2", "--m", "2"],
        vec!["decompose-audit", "--unknown-flag", "1"],
    ] {
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_czlab")).args(["list"]).env("CZLAB_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_assertions_exit_with_one_and_name_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["nc-pseudoloc", "--m", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("assertion failed: nonvacuous"));
    assert_eq!(summary(dir.path(), "nc-pseudoloc")["pass"], Value::Bool(false));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"K": 6, "m": 3, "seed": 4, "lambda": [2.0]}"#).unwrap();
    let out = run_in(dir.path(), &["cuculescu-audit", "--config", cfg.to_str().unwrap(), "--m", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "cuculescu-audit");
    assert_eq!(s["config"]["K"].as_u64(), Some(6));
    assert_eq!(s["config"]["m"].as_u64(), Some(2));
    assert_eq!(s["config"]["seed"].as_u64(), Some(4));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let read = |stem: &str| {
        (
            std::fs::read(dir.path().join(format!("{stem}.csv"))).unwrap(),
            std::fs::read(dir.path().join(format!("{stem}.json"))).unwrap(),
        )
    };
    run_in(dir.path(), &["nc-pseudoloc", "--seed", "2"]);
    let first = read("nc-pseudoloc");
    let out = Command::new(env!("CARGO_BIN_EXE_czlab"))
        .args(["run", "nc-pseudoloc", "--seed", "2", "--out", dir.path().to_str().unwrap()])
        .env("CZLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read("nc-pseudoloc"), first);
}

#[test]
fn fixtures_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["random-psd", "scalar-spike", "haar-atom", "band-limited", "constant"] {
        let m = if matches!(kind, "scalar-spike" | "haar-atom") { "1" } else { "2" };
        let mut files = Vec::new();
        for name in ["a.czg", "b.czg"] {
            let path = dir.path().join(name);
            let out = czlab(&[
                "gen-fixture",
                "--kind",
                kind,
                "--K",
                "5",
                "--m",
                m,
                "--seed",
                "11",
                "--out",
                path.to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
            files.push(std::fs::read(&path).unwrap());
        }
        assert_eq!(files[0], files[1], "{kind}");
    }
    let out =
        czlab(&["gen-fixture", "--kind", "haar-atom", "--m", "2", "--out", dir.path().join("x.czg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_fixture_is_flagged_psd_with_equal_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let out = czlab(&[
        "gen-fixture",
        "--kind",
        "constant",
        "--K",
        "3",
        "--m",
        "2",
        "--value",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["psd"], Value::Bool(true));
    let vals = v["values"].as_array().unwrap();
    assert_eq!(vals.len(), 8 * 4);
    for cell in vals.chunks(4) {
        assert_eq!(cell, &vals[..4]);
    }
}

#[test]
fn haar_fixture_feeds_the_atomic_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("atom.czg");
    let out = czlab(&[
        "gen-fixture",
        "--kind",
        "haar-atom",
        "--K",
        "10",
        "--generation",
        "7",
        "--index",
        "40",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(dir.path(), &["pseudoloc-l1", "--input", path.to_str().unwrap(), "--s", "1..7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(summary(dir.path(), "pseudoloc-l1")["constants"]["atom_generation"].as_f64(), Some(7.0));
}
