use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn mmta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmta"))
        .args(args)
        .output()
        .expect("run mmta")
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn solve_into(dir: &Path, scenario: &str, principle: &str, extra: &[&str]) -> Output {
    let scenario = fixture(scenario);
    let mut args = vec![
        "solve",
        "--scenario",
        scenario.to_str().unwrap(),
        "--principle",
        principle,
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    mmta(&args)
}

const TABLES: [&str; 3] = ["link_flows.csv", "modal_share.csv", "paths_used.csv"];

#[test]
fn repeated_solves_write_identical_tables() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = solve_into(dir.path(), "synth_s1.json", "ue", &["--set", "params.alpha=2"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let hash = |d: &Path| {
        let v: Value = serde_json::from_str(&read(d, "manifest.json")).unwrap();
        v["manifest_hash"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(a.path()), hash(b.path()));
    for table in TABLES {
        let first = read(a.path(), table);
        assert!(first.starts_with("# manifest: "), "{table}");
        assert_eq!(first, read(b.path(), table), "{table}");
    }
}

#[test]
fn tables_carry_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "synth_b1.json", "so", &[]);
    assert!(out.status.success());
    let solution: Value = serde_json::from_str(&read(dir.path(), "solution.json")).unwrap();
    let hash = solution["manifest_hash"].as_str().unwrap();
    for table in TABLES {
        let first_line = read(dir.path(), table).lines().next().unwrap().to_string();
        assert_eq!(first_line, format!("# manifest: {hash}"));
    }
}

#[test]
fn overrides_change_the_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(solve_into(a.path(), "synth_b1.json", "so", &[]).status.success());
    assert!(solve_into(b.path(), "synth_b1.json", "so", &["--set", "params.alpha=3"]).status.success());
    let hash = |d: &Path| {
        let v: Value = serde_json::from_str(&read(d, "solution.json")).unwrap();
        v["manifest_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(a.path()), hash(b.path()));
}

#[test]
fn missing_scenario_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "does_not_exist.json", "ue", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["kind"], "io");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = mmta(&["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["kind"], "usage");
}

#[test]
fn malformed_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "synth_b1.json", "ue", &["--set", "params.alpha"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_of(&out)["error"]["message"].as_str().is_some());
}

#[test]
fn zero_demand_multiplier_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture("congested_pair.json");
    let out = mmta(&[
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "demand:0..3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["error"]["kind"], "usage");
}

#[test]
fn sweep_writes_one_row_per_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fixture("congested_pair.json");
    let out = mmta(&[
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "demand:1..3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = read(dir.path(), "poa_sweep.csv");
    assert!(sweep.starts_with("# manifest: "));
    assert_eq!(sweep.lines().count(), 2 + 3);
    let poa: Value = serde_json::from_str(&read(dir.path(), "poa.json")).unwrap();
    assert!(poa["poa"].as_f64().unwrap() >= 1.0 - 1e-6);
}

#[test]
fn empty_demand_solves() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "empty.json", "ue", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let solution: Value = serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(solution["status"], "optimal");
    assert_eq!(solution["system_cost"], 0.0);
}

#[test]
fn time_limit_without_incumbent_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "siouxfalls_30od.json", "so", &["--time-limit", "1"]);
    match out.status.code() {
        Some(0) => {
            let solution: Value = serde_json::from_str(&read(dir.path(), "solution.json")).unwrap();
            assert_ne!(solution["status"], "infeasible");
        }
        Some(3) => assert_eq!(error_of(&out)["error"]["kind"], "limit"),
        other => panic!("unexpected exit {other:?}: {}", String::from_utf8_lossy(&out.stderr)),
    }
}

#[test]
fn paths_prints_csv() {
    let scenario = fixture("synth_b1.json");
    let out = mmta(&["paths", "--scenario", scenario.to_str().unwrap(), "--od", "1,2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    assert!(lines.next().is_some());
    assert!(lines.count() >= 1);
}

#[test]
fn validate_accepts_every_fixture() {
    let dir = fixture("");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    names.sort();
    for path in names {
        let out = mmta(&["validate", "--scenario", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["valid"], true);
    }
}

#[test]
fn exported_program_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("model.mps");
    let out = solve_into(dir.path(), "synth_s2.json", "so", &["--export-mps", mps.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&mps).unwrap();
    assert!(text.contains("'INTORG'") && text.contains("'INTEND'"));
    assert!(mmta::solver::parse_mps(&text).is_ok());
}
