use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oblique::fd::read_surfaces;
use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn oblique(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oblique"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn run_in(dir: &Path, command: &str, problem_name: &str, extra: &[&str]) -> Output {
    let p = problem(problem_name);
    let mut args = vec![
        command,
        "--problem",
        p.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    oblique(&args)
}

#[test]
fn zero_cost_loop_is_rejected_with_its_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "validate", "zero_cost_loop.txt", &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("validation.txt")).unwrap();
    assert!(report.contains("cycle: (1,2,1)"), "{report}");
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["passed"], false);
    assert_eq!(
        summary["validation"]["non_free_loop"]["first_violations"][0]["modes"],
        serde_json::json!([0, 1, 0])
    );
    assert_eq!(json(&dir.path().join("manifest.json"))["status"], "checks_failed");
}

#[test]
fn valid_and_invalid_fixtures() {
    for (name, code) in [
        ("two_modes.txt", 0),
        ("power_plant.txt", 0),
        ("heat.txt", 0),
        ("terminal_gap.txt", 1),
        ("negative_cost.txt", 1),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), "validate", name, &[]);
        assert_eq!(out.status.code(), Some(code), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "validate", "terminal_gap.txt", &[]);
    let csv = fs::read_to_string(dir.path().join("violations.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("terminal_consistency,1,"), "{first}");
    assert!(first.ends_with(",2;1,-4"), "{first}");
}

#[test]
fn solver_commands_refuse_invalid_problems() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "solve-pde", "negative_cost.txt", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("convergence.csv").exists());
}

#[test]
fn heat_instance_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "solve-pde", "heat.txt", &["--grid", "100x81"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["pde"]["final_inf_distance"].as_f64().unwrap() < 1e-6);
    assert!((summary["pde"]["values"][0].as_f64().unwrap() - 1.0).abs() < 1e-2);

    let log = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("q,alpha_distance,inf_distance,ratio"));
    assert_eq!(log.lines().count(), 3);

    let (meta, field) = read_surfaces(&dir.path().join("surfaces")).unwrap();
    assert_eq!(meta.grid.time_steps, 100);
    assert_eq!(field.nodes(), 81);
    let residuals = json(&dir.path().join("residuals.json"));
    assert_eq!(residuals["interior_points"], 100 * 79);

    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["status"], "passed");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["problem_text"].as_str().unwrap().contains("h1 = \"x1^2\""));
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "surfaces/mode1.csv"));
}

#[test]
fn two_mode_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        "compare",
        "two_modes.txt",
        &["--grid", "50x31", "--paths", "500", "--bootstrap", "4", "--steps", "20"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let row: Vec<f64> = csv
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(row[0], 2.0);
    assert!((row[1] - 0.5).abs() <= 0.02);
    assert!((row[2] - 0.5).abs() < 1e-12);
    assert!(row[5] <= 0.02);
}

#[test]
fn oracle_reports_the_switching_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "oracle", "two_modes.txt", &["--steps", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("summary.json"));
    let modes = &summary["oracle"]["modes"];
    assert_eq!(modes[1]["best_strategy"], "start in 2; at index 0 switch to 1");
    assert!((modes[1]["enumeration"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(modes[0]["difference"], 0.0);
}

#[test]
fn picard_diagnostic_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "picard-diag", "coupled.txt", &["--grid", "20x21"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["picard_diag"]["alpha0"], 6.4);
    assert_eq!(summary["picard_diag"]["sweep"].as_array().unwrap().len(), 5);
    assert_eq!(summary["picard_diag"]["within_limit_at_alpha0"], true);
    assert_eq!(summary["checks"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(dir.path().join("picard_diag.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 4);
}

#[test]
fn errors_are_single_coded_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "solve-pde", "does_not_exist.txt", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[io]: "), "{err}");

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "[problem]\nk = 1\nm = 1\nT = 1\n[drivers]\nf1 = \"1 +\"\n").unwrap();
    let out = oblique(&[
        "validate",
        "--problem",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[problem_"), "{err}");
    assert_eq!(
        json(&dir.path().join("manifest.json"))["status"],
        err[6..err.find(']').unwrap()]
    );

    let out = run_in(
        dir.path(),
        "solve-pde",
        "coupled.txt",
        &["--grid", "10x11", "--max-iter", "2"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error[picard_not_converged]: "));
    let log = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn seeded_runs_ignore_the_thread_cap() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--grid",
        "20x21",
        "--paths",
        "400",
        "--bootstrap",
        "4",
        "--steps",
        "10",
        "--seed",
        "11",
    ];
    let mut with_a = args.to_vec();
    with_a.extend(["--threads", "1"]);
    let mut with_b = args.to_vec();
    with_b.extend(["--threads", "3"]);
    assert_eq!(
        run_in(a.path(), "compare", "coupled.txt", &with_a).status.code(),
        Some(0)
    );
    assert_eq!(
        run_in(b.path(), "compare", "coupled.txt", &with_b).status.code(),
        Some(0)
    );
    let files = json(&a.path().join("manifest.json"))["files"].clone();
    assert!(!files.as_array().unwrap().is_empty());
    for f in files.as_array().unwrap() {
        let f = f.as_str().unwrap();
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
