//! Branch-and-bound against exhaustive enumeration on the micro fixtures.

mod common;

use mmta::costs::Principle;
use mmta::oracle::{brute_force_solve, DEFAULT_CAP};
use mmta::paths::PathCatalog;
use mmta::run::{run, RunOptions};

fn compare(name: &str, principle: Principle) {
    let s = common::fixture(name);
    let catalog = PathCatalog::build(&s);
    let r = run(&s, &catalog, principle, &RunOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(r.check.is_feasible(), "{name}: {:?}", r.check);
    let oracle = brute_force_solve(&s, &catalog, principle, Some(&r.passenger_time), DEFAULT_CAP)
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    let tol = r.model.approximation_bound + 1e-6 * oracle.objective.abs().max(1.0);
    assert!(
        (r.solution.objective - oracle.objective).abs() <= tol,
        "{name} {principle:?}: solver {} vs enumeration {} (tolerance {tol})",
        r.solution.objective,
        oracle.objective
    );
}

#[test]
fn system_optimum_matches_enumeration() {
    for name in common::micro_fixtures() {
        compare(&name, Principle::So);
    }
}

#[test]
fn user_equilibrium_matches_enumeration() {
    for name in common::micro_fixtures() {
        compare(&name, Principle::Ue);
    }
}
