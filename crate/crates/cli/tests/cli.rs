use std::path::Path;
use std::process::{Command, Output};

fn qcorr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcorr")).current_dir(dir).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

const KET0: &str = r#"{"dims": [2], "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}"#;

#[test]
fn generated_premeasurement_state_collapses() {
    let dir = tempfile::tempdir().unwrap();
    let g = qcorr(dir.path(), &["gen", "--dims", "2x2", "--kind", "premeasurement", "--seed", "7", "-o", "s.json"]);
    assert!(g.status.success());
    let out = qcorr(dir.path(), &["collapse-check", "--state", "s.json", "--kind", "vn"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "qcorr/1");
    assert!(r["result"]["gap"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn sanchez_equality_on_ket0() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ket0.json"), KET0).unwrap();
    let out = qcorr(dir.path(), &["eur-check", "--relation", "sanchez", "--state", "ket0.json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["result"]["lhs"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(r["result"]["rhs"].as_f64().unwrap(), 2.0);
    assert_eq!(r["pass"], true);
}

#[test]
fn two_way_delta_of_bell_state_is_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qcorr(dir.path(), &["gen", "--dims", "2x2", "--kind", "mes", "-o", "mes.json"]).status.success());
    let out = qcorr(dir.path(), &["measure", "--state", "mes.json", "--name", "delta2", "--kind", "vn"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["result"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(r["result"]["unit"], "bits");
}

#[test]
fn malformed_state_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"dims\": [2],\n \"matrix\": [[[1,0],[0,0]] [[0,0],[0,0]]]}").unwrap();
    let out = qcorr(dir.path(), &["collapse-check", "--state", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ket0.json"), KET0).unwrap();
    assert_eq!(qcorr(dir.path(), &["class-check", "--state", "ket0.json", "--epsilon", "0.1"]).status.code(), Some(2));
}

#[test]
fn non_premeasurement_state_fails_the_check() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qcorr(dir.path(), &["gen", "--dims", "2x2", "--kind", "mixed", "-o", "m.json"]).status.success());
    assert_eq!(qcorr(dir.path(), &["collapse-check", "--state", "m.json"]).status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(qcorr(dir.path(), &["gen", "--dims", "2x2", "--kind", "random", "--seed", "3", "-o", "r.json"]).status.success());
    let args = ["hierarchy", "--state", "r.json", "--seed", "5"];
    let a = qcorr(dir.path(), &args);
    let b = qcorr(dir.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn game_and_ecr_on_ket0() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ket0.json"), KET0).unwrap();
    let g = report(&qcorr(dir.path(), &["game", "--state", "ket0.json", "--rounds", "10"]));
    assert!((g["result"]["total_yield"].as_f64().unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(g["result"]["verdict"], "bound_met");
    let e = report(&qcorr(dir.path(), &["ecr-check", "--relation", "ecr", "--state", "ket0.json", "--format", "json"]));
    assert!((e["result"]["terms"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let csv = qcorr(dir.path(), &["game", "--state", "ket0.json", "--csv"]);
    assert_eq!(String::from_utf8_lossy(&csv.stdout).lines().count(), 4);
}

#[test]
fn table_format_is_aligned_text() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ket0.json"), KET0).unwrap();
    let out = qcorr(dir.path(), &["eur-check", "--relation", "sanchez", "--state", "ket0.json", "--format", "table"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("schema") && l.ends_with("qcorr/1")));
}
