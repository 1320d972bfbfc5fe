use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sidonlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sidonlab"))
        .args(args)
        .env_remove("SIDONLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn dependent_triple_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pts.json", "[[1,0],[0,1],[1,1]]");
    let out = sidonlab(&["verify-qi", "--input", &input]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["pass"], false);
    assert_eq!(r["data"]["qi"], false);
    let witness: Vec<i64> = serde_json::from_value(r["data"]["witness"].clone()).unwrap();
    assert_eq!(witness.len(), 3);
    assert!(witness.iter().any(|&e| e != 0));
    // Σ ε_j x_j over the coordinates of the three points
    let pts = [[1, 0], [0, 1], [1, 1]];
    for c in 0..2 {
        assert_eq!(witness.iter().zip(&pts).map(|(e, p)| e * p[c]).sum::<i64>(), 0);
    }
}

#[test]
fn independent_integers_pass() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pts.json", "[1, 3, 9, 27]");
    let out = sidonlab(&["verify-qi", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["data"]["qi"], true);
}

#[test]
fn level_matrix_is_quasi_independent() {
    let out = sidonlab(&["verify-qi", "--level", "3"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn composite_modulus_is_a_usage_error() {
    let out = sidonlab(&["select", "--p", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prime"));
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", "[1, 2");
    assert_eq!(sidonlab(&["verify-qi", "--input", &input]).status.code(), Some(2));
    assert_eq!(sidonlab(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn default_seed_is_echoed() {
    let out = sidonlab(&["select", "--trials", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["seed"], 0);
    assert_eq!(r["config"]["global"]["seed"], 0);
    assert!(r.get("runtime_secs").is_none());
}

#[test]
fn timing_flag_adds_runtime() {
    let out = sidonlab(&["--timing", "theorem1", "--nu-max", "2"]);
    assert!(report(&out)["runtime_secs"].is_number());
}

#[test]
fn theorem1_passes() {
    let out = sidonlab(&["theorem1", "--nu-max", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn appendix_check_passes() {
    let out = sidonlab(&["appendix-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn theorem2_and_theorem3_pass() {
    let out = sidonlab(&["theorem2", "--meshes", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = sidonlab(&["theorem3", "--meshes", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn infeasible_schedule_is_rejected() {
    let out = sidonlab(&["theorem3", "--w", "double-log:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runs_are_bit_identical() {
    for args in [&["--seed", "7", "select", "--trials", "200"][..], &["--seed", "3", "mesh-report", "--bound", "kwkh"][..]] {
        let a = sidonlab(args);
        let b = sidonlab(args);
        assert_eq!(a.stdout, b.stdout);
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn seed_changes_sampled_meshes() {
    let a = report(&sidonlab(&["--seed", "1", "mesh-report", "--bound", "kwkh"]));
    let b = report(&sidonlab(&["--seed", "2", "mesh-report", "--bound", "kwkh"]));
    assert_ne!(a["data"]["reports"], b["data"]["reports"]);
}

#[test]
fn config_file_values_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# comment\nnu_max = 3\nseed = 5\n");
    let out = sidonlab(&["theorem1", "--config", &cfg, "--nu-max", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["config"]["theorem1"]["nu_max"], 4);
    assert_eq!(r["provenance"]["seed"], "file");
    assert_eq!(r["provenance"]["nu-max"], "flag (overrides file)");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "bogus = 1\n");
    let out = sidonlab(&["theorem1", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn out_and_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let out = sidonlab(&[
        "theorem1",
        "--nu-max",
        "3",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(r["command"], "theorem1");
    let table = fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("k,nu,count,quarter_bound,half_bound"));
}

#[test]
fn explicit_meshes_are_counted() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write(dir.path(), "pts.json", "[1, 2, 3, 10]");
    let meshes = write(dir.path(), "m.json", r#"[{"basis": [1], "h": 3}, {"basis": [1, 10], "coefficients": [[1, 0], [0, 1], [2, 1]]}]"#);
    let out = sidonlab(&["mesh-report", "--input", &pts, "--meshes", &meshes, "--bound", "kwk"]);
    let r = report(&out);
    let counts: Vec<u64> = r["data"]["reports"].as_array().unwrap().iter().map(|m| m["count"].as_u64().unwrap()).collect();
    // {-3..3} holds 1, 2, 3; {1, 10, 12} holds 1, 10
    assert_eq!(counts, vec![3, 2]);
}
