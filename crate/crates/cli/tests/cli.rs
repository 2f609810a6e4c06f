use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn spagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spagg")).args(args).output().unwrap()
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_spagg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn values(out: &Output) -> Vec<f64> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.trim().parse().ok())
        .collect()
}

#[test]
fn estimate_pava_from_stdin() {
    let out = with_stdin(&["estimate", "--method", "pava", "--input", "-"], "value\n3\n1\n2\n");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(values(&out), vec![2.0, 2.0, 2.0]);
}

#[test]
fn estimate_tv_with_explicit_lambda() {
    let out = with_stdin(
        &["estimate", "--method", "tv", "--lambda", "0.25", "--input", "-"],
        "0\n0\n4\n4\n",
    );
    assert!(out.status.success());
    let v = values(&out);
    for (a, b) in v.iter().zip([0.5, 0.5, 3.5, 3.5]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn estimate_qagg_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.csv");
    std::fs::write(&input, "value\n0\n0.1\n-0.2\n3.1\n2.9\n3.0\n").unwrap();
    let output = dir.path().join("fit.csv");
    let diag = dir.path().join("diag.json");
    let out = spagg(&[
        "estimate",
        "--method",
        "qagg",
        "--sigma",
        "0.2",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--diagnostics",
        diag.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit = std::fs::read_to_string(&output).unwrap();
    let last: f64 = fit.lines().last().unwrap().parse().unwrap();
    assert!((last - 3.0).abs() < 1e-6);
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&diag).unwrap()).unwrap();
    assert!(d.is_object());
}

#[test]
fn estimate_rejects_garbage() {
    let out = with_stdin(&["estimate", "--method", "pava", "--input", "-"], "1\nabc\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn oracle_prints_json() {
    let out = with_stdin(
        &[
            "oracle", "--input", "-", "--family", "monotone", "--sigma", "1", "--spec", "1:1:1",
        ],
        "0\n1\n2\n3\n",
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn packing_exit_codes() {
    let ok = spagg(&["packing", "--family", "monotone", "--n", "64", "--k", "4"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(v["hypotheses"].as_array().unwrap().len() >= 2);
    assert_eq!(v["class_ok"], true);
    let convex = spagg(&["packing", "--family", "convex", "--n", "64", "--k", "4"]);
    assert_eq!(convex.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&convex.stderr).contains("FAIL class membership"));
    let bad = spagg(&["packing", "--family", "monotone", "--n", "4", "--k", "9"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn experiment_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = spagg(&[
        "experiment",
        "--signal",
        "staircase:k=2,v=1",
        "--n",
        "8,12,16",
        "--replicates",
        "30",
        "--estimator",
        "pava",
        "--estimator",
        "qagg",
        "--oracle-spec",
        "monotone:1:10:1",
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("risk.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(Path::new(&out_dir.join("risk.svg")).exists());
}

#[test]
fn experiment_from_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/determinism.toml");
    let out = spagg(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--n",
        "8",
        "--replicates",
        "30",
        "--no-plot",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("report.json").exists());
    assert!(!dir.path().join("risk.svg").exists());
}

#[test]
fn selftest_passes() {
    let out = spagg(&["selftest"]);
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
