use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrobust"))
        .args(args)
        .output()
        .unwrap()
}

fn write_points(dir: &std::path::Path) -> String {
    let path = dir.join("pts.csv");
    std::fs::write(&path, "0,0\n0.1,0\n0,0.1\n3,3\n3.1,3\n3,3.1\n").unwrap();
    path.display().to_string()
}

#[test]
fn certify_reports_json_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let out = run(&[
        "certify",
        "--input",
        &input,
        "--threshold",
        "0.5",
        "--eps",
        "0.1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["toolkit"], "specrobust");
    assert_eq!(v["config"]["subcommand"], "certify");
    assert_eq!(v["result"]["kind"], "pair");
    assert_eq!(v["result"]["delta"].as_f64(), Some(0.0));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let out_path = dir.path().join("cert.json");
    let out = run(&[
        "certify",
        "--input",
        &input,
        "--threshold",
        "0.5",
        "--eps",
        "0.1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["result"]["eps"].as_f64(), Some(0.1));
}

#[test]
fn vacuous_bound_serializes_as_inf() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let out = run(&[
        "certify",
        "--input",
        &input,
        "--threshold",
        "0.15",
        "--eps",
        "0.1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["delta"], "inf");
    assert_eq!(v["result"]["vacuous"], true);
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    assert_eq!(run(&["certify", "--input", &input]).status.code(), Some(2));
    assert_eq!(
        run(&[
            "certify",
            "--input",
            &input,
            "--threshold",
            "1",
            "--eps",
            "0.1",
            "--jobs",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.csv");
    let out = run(&[
        "certify",
        "--input",
        missing.to_str().unwrap(),
        "--threshold",
        "1",
        "--eps",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn feature_csv_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_points(dir.path());
    let csv = dir.path().join("f.csv");
    let out = run(&[
        "features",
        "--input",
        &input,
        "--auto-threshold",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# specrobust"));
    assert!(lines[1].starts_with("# config: {"));
    assert_eq!(lines.len(), 2 + 6);
}
