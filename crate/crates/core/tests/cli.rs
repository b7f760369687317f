use std::fs;
use std::process::{Command, Output};

use hopfmin::fibers::{fit_great_circle, FiberCurve};
use serde_json::Value;

fn hopfmin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hopfmin")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn hopf_invariant_writes_report_and_fibers() {
    let dir = tempfile::tempdir().unwrap();
    let out = hopfmin(&["hopf-invariant", "--map", "hopf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["value"], 1);
    assert_eq!(v["report"]["crossings"], 1);
    assert_eq!(v["config"]["command"], "hopf-invariant");
    assert_eq!(fs::read(dir.path().join("report.json")).unwrap(), out.stdout);
    let names: Vec<String> = v["report"]["fiber_files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n.as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["fiber_a_0.csv", "fiber_b_0.csv"]);
    for n in names {
        let c = FiberCurve::read_csv(fs::File::open(dir.path().join(n)).unwrap()).unwrap();
        assert!(fit_great_circle(&c.points).unwrap().max_residual < 1e-8);
    }
}

#[test]
fn power_zero_has_no_fibers_over_the_pole_side() {
    let out = hopfmin(&["hopf-invariant", "--map", "power(0)"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["report"]["value"], 0);
}

#[test]
fn lipschitz_of_stiefel_projection() {
    let out = hopfmin(&["lipschitz", "--map", "stiefel-quat", "--samples", "1000", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["report"];
    let (lo, hi) = (r["pair_lower"].as_f64().unwrap(), r["spectral_sup"].as_f64().unwrap());
    assert!((hi - 2f64.sqrt()).abs() < 1e-4, "{hi}");
    assert!(lo > 1.41 && lo <= hi + 1e-3, "{lo}");
}

#[test]
fn json_map_descriptors_are_accepted() {
    let map = r#"{"family":"diagonal_inclusion","n":2}"#;
    let out = hopfmin(&["lipschitz", "--map", map, "--samples", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config"]["map"]["family"], "diagonal_inclusion");
    let lo = v["report"]["pair_lower"].as_f64().unwrap();
    assert!((lo - 1.0).abs() < 1e-3, "{lo}");
}

#[test]
fn verify_named_checks() {
    for check in ["theorem-d", "lemma-f", "sasaki-lengths", "theorem-c"] {
        let out = hopfmin(&["verify", check, "--seed", "7"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{check}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&out)["report"]["pass"], true);
    }
    let out = hopfmin(&["verify", "--check", "torus", "--samples", "2"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn failing_and_inconclusive_exit_codes() {
    let out = hopfmin(&[
        "verify",
        "parallel",
        "--map",
        "bump(0.2,0.5)",
        "--samples",
        "3",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["report"]["pass"], false);
    let out = hopfmin(&["verify", "key-lemma", "--samples", "1", "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["report"]["inconclusive"], true);
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"command":"verify","seed":7,"check":"theorem-d","samples":300}"#,
    )
    .unwrap();
    let a = hopfmin(&["run", "--config", path.to_str().unwrap()]);
    let b = hopfmin(&["verify", "theorem-d", "--seed", "7", "--samples", "300"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    // the embedded config is itself a valid config reproducing the run
    let embedded = serde_json::to_string(&json(&a)["config"]).unwrap();
    fs::write(&path, embedded).unwrap();
    assert_eq!(hopfmin(&["run", "--config", path.to_str().unwrap()]).stdout, a.stdout);

    fs::write(
        &path,
        r#"{"command":"verify","seed":7,"check":"theorem-d","tolerance":1}"#,
    )
    .unwrap();
    let bad = hopfmin(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown field"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(hopfmin(&["verify"]).status.code(), Some(64));
    assert_eq!(hopfmin(&["verify", "bogus"]).status.code(), Some(64));
    assert_eq!(hopfmin(&["lipschitz", "--map", "power(x)"]).status.code(), Some(64));
    assert_eq!(
        hopfmin(&["hopf-invariant", "--map", "hopf-quat"]).status.code(),
        Some(64)
    );
    assert_eq!(hopfmin(&["--version"]).status.code(), Some(0));
}
