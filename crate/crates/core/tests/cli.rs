use std::path::Path;
use std::process::Command;

fn calderon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calderon"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SEGMENT: &str = r#"{"algebra":{"kind":"matrix","n":1},
    "model":{"base":"segment","potential":[[0.3]],"coupling":[[0.8]]},
    "grid":{"n_u":16},"tasks":["double","calderon","export"],"seed":4}"#;

#[test]
fn unknown_key_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SEGMENT.replace("\"seed\":4", "\"seed\":4,\"sede\":5");
    let cfg = write(dir.path(), "bad.json", &bad);
    let out = dir.path().join("out");
    let res = calderon().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sede"));
    assert!(!out.exists());
}

#[test]
fn unknown_task_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &SEGMENT.replace("\"export\"", "\"plot\""));
    assert_eq!(calderon().arg("run").arg(&cfg).status().unwrap().code(), Some(2));
}

#[test]
fn missing_file_is_a_config_error() {
    assert_eq!(calderon().args(["run", "/nonexistent/cfg.json"]).status().unwrap().code(), Some(2));
}

#[test]
fn run_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "seg.json", SEGMENT);
    let out = dir.path().join("out");
    let res = calderon().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["tasks"].as_array().unwrap().len(), 3);
    for f in ["calderon.bin", "calderon.csv", "poisson.bin", "poisson_y0.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let m = calderon_core::io::read_matrix(&out.join("calderon.bin")).unwrap();
    assert_eq!(m.1.nrows(), 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "seg.json", SEGMENT);
    for sub in ["a", "b"] {
        assert!(calderon().arg("run").arg(&cfg).arg("--out").arg(dir.path().join(sub)).status().unwrap().success());
    }
    for f in ["calderon.csv", "poisson_y0.csv", "calderon.bin", "poisson.bin"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn convergence_on_analytic_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "seg.json", SEGMENT);
    let res = calderon().arg("convergence").arg(&cfg).args(["--levels", "3"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("convergence study requires dense path"));
}

#[test]
fn convergence_needs_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let dense = SEGMENT.replace("\"tasks\"", "\"discretization\":\"dense\",\"tasks\"");
    let cfg = write(dir.path(), "seg.json", &dense);
    assert_eq!(calderon().arg("convergence").arg(&cfg).args(["--levels", "2"]).status().unwrap().code(), Some(2));
}

#[test]
fn convergence_command_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let dense = r#"{"algebra":{"kind":"matrix","n":1},
        "model":{"base":"segment","potential":[[0.0]],"coupling":[[0.8]]},
        "grid":{"n_u":32},"discretization":"dense","tasks":["double"]}"#;
    let cfg = write(dir.path(), "seg.json", dense);
    let out = dir.path().join("conv");
    let res = calderon().arg("convergence").arg(&cfg).args(["--levels", "3", "--out"]).arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("n_u,h,"));
}

#[test]
fn failing_task_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = SEGMENT.replace("\"tasks\"", "\"tolerances\":{\"sigma_min\":100.0},\"tasks\"").replace(",\"export\"", "");
    let cfg = write(dir.path(), "seg.json", &text);
    assert_eq!(calderon().arg("run").arg(&cfg).status().unwrap().code(), Some(1));
}
