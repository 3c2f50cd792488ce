use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn tq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tq")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = tq(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    v.as_f64().is_some_and(|x| (x - want).abs() <= tol)
}

#[test]
fn stats_examples() {
    let r = report(&["stats", "--circuit", &fixture("teleport.json")]);
    assert_eq!(r["connectivity"]["matrix"][0][0], "weak");
    assert_eq!(r["quantum_depth"], 4);

    let r = report(&["stats", "--circuit", &fixture("wire10-transpiled.json"), "--bound", "6"]);
    assert_eq!(r["layer_class"], "AQCL(6)");
    assert!(r["quantum_depth"].as_u64().unwrap() <= 6);

    let r = report(&["stats", "--circuit", &fixture("classical.json")]);
    assert_eq!(r["quantum_depth"], 0);
}

#[test]
fn bounds_examples() {
    let r = report(&["bounds", "--delta", "0", "--k", "2", "--n", "3"]);
    assert_eq!(r["eps"], 0.0);
    let r = report(&["bounds", "--eps", "0"]);
    assert_eq!(r["gadget_delta"], 0.0);
    let r = report(&["bounds", "--delta", "1e-4", "--k", "2", "--n", "3"]);
    assert!(close(&r["eps"], 0.316228, 1e-6));
    let r = report(&["bounds", "--eps", "0.01", "--divide-by-three"]);
    assert!(close(&r["gadget_delta"], 0.2667701 / 3.0, 1e-7));
}

#[test]
fn exit_codes() {
    assert_eq!(tq(&["bounds", "--delta", "1.5", "--k", "2", "--n", "1"]).status.code(), Some(1));
    assert_eq!(tq(&["bounds", "--eps=-1"]).status.code(), Some(1));
    assert_eq!(tq(&["bounds"]).status.code(), Some(2));
    assert_eq!(tq(&["stats"]).status.code(), Some(2));
    assert_eq!(tq(&["stats", "--circuit", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(tq(&["validate", "--circuit", &fixture("bell.json")]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name": "x", "nodes": [{"id": 0, "kind": "input"}, {"id": 1, "kind": "unitary", "gate": "H"}],
            "edges": [{"from": [0, 0], "to": [1, 0], "type": "q"}]}"#,
    )
    .unwrap();
    let bad = bad.to_str().unwrap();
    for cmd in ["validate", "stats", "transpile", "simulate"] {
        let out = tq(&[cmd, "--circuit", bad]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("port 0 of node 1"));
    }
    std::fs::write(dir.path().join("bad.json"), r#"{"name": "x", "nodes": [], "edges": [], "extra": 1}"#).unwrap();
    assert_eq!(tq(&["validate", "--circuit", bad]).status.code(), Some(1));
}

#[test]
fn shipped_fixtures_match_the_builtins() {
    for (name, file) in [
        ("teleport", "teleport.json"),
        ("bell", "bell.json"),
        ("wire10", "wire10.json"),
        ("random2q", "random2q.json"),
        ("classical", "classical.json"),
        ("measure-copy", "measure-copy.json"),
        ("measure-reprepare", "measure-reprepare.json"),
    ] {
        let out = tq(&["fixture", name]);
        assert!(out.status.success());
        let shipped = std::fs::read(fixture(file)).unwrap();
        assert_eq!(out.stdout, shipped, "{file}");
    }
    let out = tq(&["transpile", "--circuit", &fixture("wire10.json")]);
    assert_eq!(out.stdout, std::fs::read(fixture("wire10-transpiled.json")).unwrap());
}

#[test]
fn transpile_round_trips_through_the_file_format() {
    let dir = tempfile::tempdir().unwrap();
    let once = dir.path().join("once.json");
    let twice = dir.path().join("twice.json");
    let out = tq(&["transpile", "--circuit", &fixture("random2q.json"), "--out", once.to_str().unwrap()]);
    assert!(out.status.success());
    let r = report(&["stats", "--circuit", once.to_str().unwrap()]);
    assert!(r["quantum_depth"].as_u64().unwrap() <= 6);
    // Transpiling again still stays within depth 6.
    assert!(tq(&["transpile", "--circuit", once.to_str().unwrap(), "--out", twice.to_str().unwrap()])
        .status
        .success());
    let r = report(&["stats", "--circuit", twice.to_str().unwrap()]);
    assert!(r["quantum_depth"].as_u64().unwrap() <= 6);

    let r = report(&["transpile", "--circuit", &fixture("bell.json"), "--edges", "0,2"]);
    assert_eq!(r["edges"].as_array().unwrap().len(), 5 + 2 * 10);
    assert_eq!(tq(&["transpile", "--circuit", &fixture("bell.json"), "--edges", "99"]).status.code(), Some(1));
}

#[test]
fn simulate_reports() {
    let r = report(&["simulate", "--circuit", &fixture("teleport.json"), "--input", "+i"]);
    assert!(close(&r["total_probability"], 1.0, 1e-12));
    let rho = &r["output_state"];
    assert!(close(&rho[0][1][1], -0.5, 1e-10), "{rho}");

    let r = report(&["simulate", "--circuit", &fixture("measure-copy.json"), "--input", "+"]);
    assert!(close(&r["classical"]["00"], 0.5, 1e-12));
    assert!(close(&r["classical"]["11"], 0.5, 1e-12));

    let r = report(&[
        "simulate",
        "--circuit",
        &fixture("wire10.json"),
        "--germ-model",
        &fixture("models/coherent.json"),
    ]);
    assert!(close(&r["output_state"][1][1][0], 1.0f64.sin().powi(2), 1e-10));
}

#[test]
fn sampling_is_reproducible() {
    let args = |seed: &'static str| {
        ["simulate", "--circuit", "", "--input", "+", "--mode", "sample", "--seed", seed].map(str::to_string)
    };
    let circuit = fixture("measure-copy.json");
    let run = |seed| {
        let mut a = args(seed);
        a[2] = circuit.clone();
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        tq(&a).stdout
    };
    assert_eq!(run("5"), run("5"));
    let classical = |seed| serde_json::from_slice::<Value>(&run(seed)).unwrap()["classical"].to_string();
    let outcomes: std::collections::BTreeSet<String> = ["1", "2", "3", "4", "5", "6", "7", "8"].map(classical).into();
    assert_eq!(outcomes.len(), 2);
}

#[test]
fn pipeline_examples() {
    let wire = fixture("wire10.json");
    let r = report(&["pipeline", "--circuit", &wire, "--germ-model", &fixture("models/identity.json")]);
    assert!(close(&r["untransformed"]["fidelity"], 1.0, 1e-9));
    assert!(close(&r["transpiled"]["fidelity"], 1.0, 1e-9));

    let r = report(&["pipeline", "--circuit", &wire, "--germ-model", &fixture("models/delayed.json")]);
    assert!(r["untransformed"]["fidelity"].as_f64().unwrap() < 0.999);
    assert!(close(&r["transpiled"]["fidelity"], 1.0, 1e-9));
    assert_eq!(r["transpiled"]["quasi_independence"]["passed"], true);
    assert_eq!(r["quasi_independent_after_transpile"], true);
    assert_eq!(r["transpiled"]["n"], 6);
}

#[test]
fn analyze_report_shape() {
    let r = report(&[
        "analyze",
        "--circuit",
        &fixture("bell.json"),
        "--germ-model",
        &fixture("models/spreading.json"),
        "--top",
        "3",
    ]);
    for key in ["delta_profile", "expansion", "thm3_check", "quasi_independence", "bounds"] {
        assert!(!r[key].is_null(), "{key}");
    }
    assert_eq!(r["expansion"]["top"].as_array().unwrap().len(), 3);
    assert_eq!(r["thm3_check"]["passed"], true);
    assert!(r["bounds"]["eps"].is_number() && r["bounds"]["gadget_delta"].is_number());

    let out = tq(&[
        "analyze",
        "--circuit",
        &fixture("wire10.json"),
        "--germ-model",
        &fixture("models/delayed.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--edge-cap"));
}

#[test]
fn gadget_check_summary() {
    let out = Command::new(env!("CARGO_BIN_EXE_tq"))
        .args(["gadget-check", "--summary-only"])
        .env("TQ_JOBS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["patterns"], 65536);
    assert_eq!(r["unclassified"], 0);
    for p in ["I", "X", "Y", "Z"] {
        assert_eq!(r["counts"][p], 16384);
    }
}
