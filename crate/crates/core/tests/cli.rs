use std::process::Command;

use rkns::grid::parse_field_dump;

fn rkns() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rkns"))
}

fn summary_value(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

#[test]
fn run_writes_summary_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = rkns()
        .args(["run", "--problem", "taylor", "--nx", "8", "--dt", "0.01", "--t-end", "0.05", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary_value(&summary, "steps_accepted").as_deref(), Some("5"));
    let (_, n, t, values) = parse_field_dump(&std::fs::read_to_string(dir.path().join("u.txt")).unwrap()).unwrap();
    assert_eq!((n, values.len()), (8, 7 * 8));
    assert!((t - 0.05).abs() < 1e-15);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# small run\nproblem = forced\nnx = 8\ndt = 0.01\nt-end = 0.02\nintegrator = rkc\ncoupling = pm1\npressure = p1\n").unwrap();
    let out = rkns().arg("run").arg("--config").arg(&file).args(["--nx", "12"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary_value(&text, "n").as_deref(), Some("12"));
    assert_eq!(summary_value(&text, "method").as_deref(), Some("rkc-pm1-p1-cp0"));
}

#[test]
fn illegal_combination_fails_before_running() {
    let out = rkns().args(["run", "--integrator", "rkc", "--coupling", "dae", "--adaptive"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn convergence_prints_csv() {
    let out = rkns()
        .args(["convergence", "--problem", "taylor", "--nx", "8", "--t-end", "0.25"])
        .args(["--levels", "3,4", "--reference-level", "6"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,velocity_error,pressure_error,velocity_slope,pressure_slope"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn missing_reference_is_skipped_with_a_notice() {
    let out = rkns()
        .args(["ghia", "--nx", "8", "--re", "100", "--dt", "0.01", "--t-end", "0.02", "--reference"])
        .arg("/nonexistent/ghia.csv")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!String::from_utf8_lossy(&out.stdout).contains("u_rms"));
}
