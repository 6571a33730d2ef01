#![allow(dead_code)]

use std::path::PathBuf;

use mmta::network::{load_scenario, Scenario};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> Scenario {
    let path = fixtures_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Names of the micro fixtures, relative to the fixtures directory.
pub fn micro_fixtures() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir().join("micro"))
        .expect("micro fixtures directory")
        .map(|e| e.expect("directory entry").file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .map(|n| format!("micro/{n}"))
        .collect();
    names.sort();
    names
}

/// Every shipped fixture, relative to the fixtures directory.
pub fn all_fixtures() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory")
        .map(|e| e.expect("directory entry").file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names.extend(micro_fixtures());
    names
}
