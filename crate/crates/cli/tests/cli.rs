use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artin-kms")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(name: &str) -> String {
    model(name).to_string_lossy().into_owned()
}

#[test]
fn check_exit_codes_follow_verdict() {
    let pass = run(&["check", "--model", &path("phase_transition.json"), "--trace", "half", "--beta", "1.5"]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(json(&pass)["pass"], Value::Bool(true));

    let fail = run(&["check", "--model", &path("phase_transition.json"), "--trace", "half", "--beta", "0.5"]);
    assert_eq!(fail.status.code(), Some(1));
    assert_eq!(json(&fail)["pass"], Value::Bool(false));
}

#[test]
fn optimal_measure_fails_only_on_the_swap_generators() {
    let out = run(&["check", "--model", &path("optimal.json"), "--trace", "mu", "--beta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let failing = &json(&out)["result"]["failing"];
    assert_eq!(failing, &serde_json::json!([["e1", "e2"]]));
}

#[test]
fn malformed_model_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, "{\n  \"traces\": {\"x\": [1,]}\n}\n").unwrap();
    let out = run(&["check", "--model", file.to_str().unwrap(), "--beta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bad_arguments_are_errors() {
    let unknown = run(&["check", "--model", &path("phase_transition.json"), "--trace", "nope", "--beta", "1"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("half"));

    let ambiguous = run(&["check", "--model", &path("phase_transition.json"), "--beta", "1"]);
    assert_eq!(ambiguous.status.code(), Some(2));

    let range = run(&["sweep", "--model", &path("free_pair.json"), "--beta-range", "2:1:5"]);
    assert_eq!(range.status.code(), Some(2));

    let csv = run(&["--format", "csv", "check", "--model", &path("free_pair.json"), "--beta", "1"]);
    assert_eq!(csv.status.code(), Some(2));

    let missing = run(&["critical", "--model", "/nonexistent/model.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn inline_trace_matches_named_trace() {
    let named = run(&["wold", "--model", &path("phase_transition.json"), "--trace", "skew", "--beta", "2"]);
    let inline = run(&["wold", "--model", &path("phase_transition.json"), "--trace-inline", "0.7,0.3", "--beta", "2"]);
    assert_eq!(named.status.code(), Some(0));
    assert_eq!(json(&named)["result"], json(&inline)["result"]);
    assert_eq!(json(&named)["result"]["type"], "finite");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["sweep", "--model", &path("phase_transition.json"), "--trace", "half", "--beta-range", "0.5:3:26"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sweep.csv");
    let mut with_out = vec!["--format", "csv", "--out", file.to_str().unwrap()];
    with_out.extend_from_slice(&args);
    let c = run(&with_out);
    assert_eq!(c.status.code(), Some(0));
    assert!(c.stdout.is_empty());
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,subinvariant,min_slack,mass_tau0,mass_tau_inf,sigma_min"));
    let betas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(betas.len(), 26);
    assert!(betas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn critical_reports_witness() {
    let out = run(&["critical", "--model", &path("phase_transition.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["critical"]["beta_c"], 1.0);
    assert_eq!(v["result"]["witness"]["method"], "perron");

    let loops = json(&run(&["critical", "--model", &path("three_loops.json")]));
    assert_eq!(loops["result"]["critical"]["beta_c"], 1.0);
}

#[test]
fn atoms_and_decompose_run() {
    let atoms = run(&["atoms", "--model", &path("free_pair.json"), "--beta", "2", "--length", "3"]);
    assert_eq!(atoms.status.code(), Some(0));
    assert_eq!(json(&atoms)["result"]["atoms"].as_array().unwrap().len(), 15);

    let dec = run(&["decompose", "--model", &path("phase_transition.json"), "--trace", "half", "--beta", "1"]);
    assert_eq!(dec.status.code(), Some(0), "{}", String::from_utf8_lossy(&dec.stderr));
}

#[test]
fn built_in_examples_pass() {
    for args in [
        vec!["verify-example", "optimal"],
        vec!["verify-example", "kgraph", "--seed", "7", "--trials", "5"],
        vec!["verify-example", "blrs"],
        vec!["verify-example", "semigroup"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert_eq!(json(&out)["pass"], Value::Bool(true));
    }
    let a = run(&["verify-example", "kgraph", "--seed", "3", "--trials", "4"]);
    let b = run(&["verify-example", "kgraph", "--seed", "3", "--trials", "4"]);
    assert_eq!(a.stdout, b.stdout);
}
