use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn screenstat(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_screenstat"))
        .args(args)
        .output()
        .expect("run screenstat")
}

fn analyze(out: &Path) -> Output {
    screenstat(&[
        Path::new("analyze"),
        Path::new("--matrix"),
        &fixture("liu2020.csv"),
        Path::new("--incidence"),
        &fixture("liu2020_incidence.json"),
        Path::new("--out"),
        out,
    ])
}

#[test]
fn analyze_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("liu.json");
    let run = analyze(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let intrinsic = std::fs::read_to_string(dir.path().join("liu.intrinsic.csv")).unwrap();
    assert!(intrinsic.starts_with("state,false_negative,accuracy,accuracy_lower,accuracy_upper"));
    assert!(intrinsic.contains("Kidney,88.0,12.0,3.8,31.8"));
    let readouts = std::fs::read_to_string(dir.path().join("liu.readouts.csv")).unwrap();
    assert_eq!(readouts.lines().count(), 12);
}

#[test]
fn analyze_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(analyze(&a).status.success());
    assert!(analyze(&b).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn invalid_matrix_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "state,Negative,A\nControl,10,-1\nA,3,4\n").unwrap();
    let run = screenstat(&[
        Path::new("analyze"),
        Path::new("--matrix"),
        &bad,
        Path::new("--incidence"),
        &fixture("liu2020_incidence.json"),
        Path::new("--out"),
        &dir.path().join("out.json"),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&run.stderr).is_empty());
}

#[test]
fn missing_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let run = screenstat(&[
        Path::new("analyze"),
        Path::new("--matrix"),
        &dir.path().join("absent.csv"),
        Path::new("--incidence"),
        &fixture("liu2020_incidence.json"),
        Path::new("--out"),
        &dir.path().join("out.json"),
    ]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn cost_benefit_marks_target_region() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("liu.json");
    assert!(analyze(&report).status.success());
    let out = dir.path().join("cb.csv");
    let run = screenstat(&[Path::new("cost-benefit"), Path::new("--report"), &report, Path::new("--out"), &out]);
    assert!(run.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("readout,benefit,cost,in_target_region"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    let lung = rows.iter().find(|r| r[0] == "Lung").unwrap();
    assert!((lung[1].parse::<f64>().unwrap() - 0.640).abs() < 0.005);
    assert_eq!(lung[3], "true");
    let kidney = rows.iter().find(|r| r[0] == "Kidney").unwrap();
    assert_eq!(kidney[3], "false");
}

#[test]
fn simulate_writes_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("small.json");
    std::fs::write(
        &scenario,
        r#"{"n0": 200, "n1": 200, "overall_incidence": 0.02, "case_shares": [0.6],
            "rows": [[0.9, 0.05, 0.05], [0.3, 0.6, 0.1], [0.3, 0.1, 0.6]],
            "replicates": 200, "seed": 11}"#,
    )
    .unwrap();
    let out = dir.path().join("small_out.json");
    let run = screenstat(&[Path::new("simulate"), Path::new("--scenario"), &scenario, Path::new("--out"), &out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let table = std::fs::read_to_string(dir.path().join("small_out.csv")).unwrap();
    assert!(table.starts_with("metric,Value,Bias,Coverage,Width"));
    assert_eq!(table.lines().count(), 10);
}

#[test]
fn unknown_scenario_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("typo.json");
    std::fs::write(
        &scenario,
        r#"{"n0": 200, "n1": 200, "overall_incidence": 0.02, "case_shares": [],
            "rows": [[0.9, 0.1], [0.3, 0.7]], "replicates": 10, "seed": 1, "replicate": 5}"#,
    )
    .unwrap();
    let run = screenstat(&[
        Path::new("simulate"),
        Path::new("--scenario"),
        &scenario,
        Path::new("--out"),
        &dir.path().join("o.json"),
    ]);
    assert_eq!(run.status.code(), Some(2));
}
