//! Equilibrium verification on the congested and bus fixtures.

mod common;

use mmta::analysis::{verify_equilibrium, Verdict};
use mmta::costs::Principle;
use mmta::paths::PathCatalog;
use mmta::run::{run, RunOptions};

#[test]
fn system_optimum_leaves_a_profitable_deviation() {
    let s = common::fixture("congested_pair.json").with_demand_scaled(10);
    let catalog = PathCatalog::build(&s);
    let so = run(&s, &catalog, Principle::So, &RunOptions::default()).unwrap();
    let report = verify_equilibrium(&s, &catalog, &so.model.space, &so.assignment, Principle::Ue, 1e-6);
    assert!(!report.passed());
    assert!(report.rows.iter().any(|r| r.verdict == Verdict::ProfitableDeviation));
}

#[test]
fn user_equilibrium_on_the_same_network_passes() {
    let s = common::fixture("congested_pair.json").with_demand_scaled(10);
    let catalog = PathCatalog::build(&s);
    let ue = run(&s, &catalog, Principle::Ue, &RunOptions::default()).unwrap();
    let report = verify_equilibrium(&s, &catalog, &ue.model.space, &ue.assignment, Principle::Ue, 1e-6);
    assert!(report.passed(), "{:#?}", report.rows);
}

#[test]
fn full_bus_deviation_adds_a_unit() {
    let s = common::fixture("synth_b1.json");
    let catalog = PathCatalog::build(&s);
    let ue = run(&s, &catalog, Principle::Ue, &RunOptions::default()).unwrap();
    let report = verify_equilibrium(&s, &catalog, &ue.model.space, &ue.assignment, Principle::Ue, 1e-6);
    assert!(report.passed());
    let flows: Vec<f64> = report.rows.iter().map(|r| r.flow).collect();
    assert_eq!(flows, [90.0, 10.0]);
    let detour = report.rows.iter().find(|r| r.option.ends_with(" 1-3-2")).unwrap();
    let deviation = detour.cost - detour.deviation_best_gain.unwrap();
    assert!((deviation - 14.668).abs() <= 1e-3, "{deviation}");
}

#[test]
fn empty_demand_is_trivially_an_equilibrium() {
    let s = common::fixture("empty.json");
    let catalog = PathCatalog::build(&s);
    let ue = run(&s, &catalog, Principle::Ue, &RunOptions::default()).unwrap();
    let report = verify_equilibrium(&s, &catalog, &ue.model.space, &ue.assignment, Principle::Ue, 1e-6);
    assert!(report.passed());
    assert!(report.rows.is_empty());
    assert_eq!(ue.cost.total, 0.0);
    assert_eq!(ue.solution.nodes, 1);
}
