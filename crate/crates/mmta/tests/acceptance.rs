//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails when any criterion fails.
//!
//! Run with `cargo test -p mmta --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use mmta::analysis::{
    modal_share, poa_upper_bound, price_of_anarchy, selfish_routing_bound, verify_equilibrium, Verdict,
};
use mmta::check::check_assignment;
use mmta::costs::Principle;
use mmta::model::{BuildOptions, ObjectiveApprox};
use mmta::network::Scenario;
use mmta::oracle::{brute_force_solve, DEFAULT_CAP};
use mmta::paths::PathCatalog;
use mmta::run::{initial_model, run, RunOptions, RunResult};
use mmta::solver::{matrix_hash, parse_mps, to_mps, SolveStatus};

/// Equilibrium deviation gain accepted by the verifier.
const EQUILIBRIUM_TOL: f64 = 1e-6;
/// Cost a traveller would face by joining the full direct route.
const DEVIATION_COST: f64 = 14.668;
const DEVIATION_COST_TOL: f64 = 1e-3;
const POA_FLOOR_TOL: f64 = 1e-6;
const BOUND_TOL: f64 = 1e-3;
const PT_SHARE_MIN: f64 = 0.60;
const POA_RANGE: (f64, f64) = (1.15, 1.30);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const SWEEP_BUDGET: Duration = Duration::from_secs(600);
const SOLVE_BUDGET: Duration = Duration::from_secs(60);
/// Fixtures too large for the built-in solver get this much time per
/// principle; they only count where they finish Optimal.
const LARGE_FIXTURE_LIMIT: Duration = Duration::from_secs(10);
const LARGE_FIXTURES: &[&str] = &["siouxfalls_30od.json"];

struct Solved {
    scenario: Scenario,
    catalog: PathCatalog,
    ue: Option<RunResult>,
    so: Option<RunResult>,
}

impl Solved {
    fn both_optimal(&self) -> Option<(&RunResult, &RunResult)> {
        match (&self.ue, &self.so) {
            (Some(u), Some(s)) if u.solution.status == SolveStatus::Optimal && s.solution.status == SolveStatus::Optimal => {
                Some((u, s))
            }
            _ => None,
        }
    }
}

fn options_for(name: &str) -> RunOptions {
    let mut opts = RunOptions::default();
    if LARGE_FIXTURES.contains(&name) {
        opts.solver.time_limit = Some(LARGE_FIXTURE_LIMIT);
    }
    opts
}

fn solve_all() -> BTreeMap<String, Solved> {
    let mut out = BTreeMap::new();
    for name in common::all_fixtures() {
        let scenario = common::fixture(&name);
        let catalog = PathCatalog::build(&scenario);
        let opts = options_for(&name);
        let ue = run(&scenario, &catalog, Principle::Ue, &opts).ok();
        let so = run(&scenario, &catalog, Principle::So, &opts).ok();
        out.insert(
            name,
            Solved {
                scenario,
                catalog,
                ue,
                so,
            },
        );
    }
    out
}

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, criterion: usize, pass: bool, detail: String) {
        // Bypasses the harness output capture.
        let line = format!("criterion {criterion}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
        let _ = std::io::stderr().write_all(line.as_bytes());
        self.lines.push((criterion, pass, detail));
    }
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let names = common::micro_fixtures();
    let mut failures = Vec::new();
    let mut compared = 0;
    for name in &names {
        let s = common::fixture(name);
        let catalog = PathCatalog::build(&s);
        for principle in [Principle::Ue, Principle::So] {
            let r = match run(&s, &catalog, principle, &RunOptions::default()) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("{name} {principle:?}: {e}"));
                    continue;
                }
            };
            match brute_force_solve(&s, &catalog, principle, Some(&r.passenger_time), DEFAULT_CAP) {
                Ok(o) => {
                    let tol = r.model.approximation_bound + 1e-6 * o.objective.abs().max(1.0);
                    if (r.solution.objective - o.objective).abs() > tol {
                        failures.push(format!("{name} {principle:?}: {} vs {}", r.solution.objective, o.objective));
                    }
                    compared += 1;
                }
                Err(e) => failures.push(format!("{name} {principle:?}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && names.len() >= 10 && elapsed < ORACLE_BUDGET;
    report.record(
        1,
        pass,
        format!(
            "{} micro fixtures, {compared} solver/enumeration pairs agree, {:.1} s{}",
            names.len(),
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    );
}

fn criterion_2(report: &mut Report, solved: &BTreeMap<String, Solved>) {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, s) in solved {
        let Some(ue) = s.ue.as_ref().filter(|r| r.solution.status == SolveStatus::Optimal) else {
            continue;
        };
        let rep = verify_equilibrium(&s.scenario, &s.catalog, &ue.model.space, &ue.assignment, Principle::Ue, EQUILIBRIUM_TOL);
        checked += 1;
        if !rep.passed() {
            failures.push(name.clone());
        }
    }
    let b1 = &solved["synth_b1.json"];
    let deviation = b1.ue.as_ref().and_then(|ue| {
        let rep = verify_equilibrium(&b1.scenario, &b1.catalog, &ue.model.space, &ue.assignment, Principle::Ue, EQUILIBRIUM_TOL);
        rep.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Equilibrium && r.option.ends_with(" 1-3-2"))
            .find_map(|r| r.deviation_best_gain.map(|g| r.cost - g))
    });
    let deviation_ok = deviation.is_some_and(|d| (d - DEVIATION_COST).abs() <= DEVIATION_COST_TOL);
    report.record(
        2,
        failures.is_empty() && checked > 0 && deviation_ok,
        format!(
            "{checked} optimal UE solves verified, failing: {failures:?}; detour traveller's best deviation costs {}",
            deviation.map_or("n/a".to_string(), |d| format!("{d:.4}"))
        ),
    );
}

fn criterion_3(report: &mut Report) {
    let s = common::fixture("parallel_links.json");
    let catalog = PathCatalog::build(&s);
    let continuous = RunOptions {
        build: BuildOptions {
            integer: false,
            approx: ObjectiveApprox::Chords,
            ..BuildOptions::default()
        },
        ..RunOptions::default()
    };
    let relaxed = run(&s, &catalog, Principle::So, &continuous).map(|r| r.solution.objective);
    let integer = run(&s, &catalog, Principle::So, &RunOptions::default()).map(|r| r.solution.objective);
    let pass = matches!((&relaxed, &integer), (Ok(c), Ok(i)) if *c == 0.5 && *i == 1.0);
    report.record(3, pass, format!("continuous {relaxed:?}, integer {integer:?}"));
}

fn criterion_4(report: &mut Report, solved: &BTreeMap<String, Solved>) {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, s) in solved {
        let Some((ue, so)) = s.both_optimal() else { continue };
        let Some(poa) = price_of_anarchy(ue.cost.total, so.cost.total) else { continue };
        let bound = poa_upper_bound(
            s.scenario.params.bpr_beta,
            s.scenario.links.len(),
            s.scenario.offered_modes().len(),
            s.scenario.total_demand() as f64,
        );
        checked += 1;
        if poa < 1.0 - POA_FLOOR_TOL || poa > bound {
            failures.push(format!("{name}: {poa}"));
        }
    }
    let start = Instant::now();
    let base = common::fixture("congested_pair.json");
    let mut sweep = Vec::new();
    for k in 1..=10u64 {
        let s = base.with_demand_scaled(k);
        let catalog = PathCatalog::build(&s);
        let ue = run(&s, &catalog, Principle::Ue, &RunOptions::default());
        let so = run(&s, &catalog, Principle::So, &RunOptions::default());
        match (ue, so) {
            (Ok(u), Ok(o)) => sweep.push(price_of_anarchy(u.cost.total, o.cost.total).unwrap_or(f64::NAN)),
            _ => sweep.push(f64::NAN),
        }
    }
    let elapsed = start.elapsed();
    let monotone = sweep.windows(2).all(|w| w[1] >= w[0] - POA_FLOOR_TOL);
    let last = *sweep.last().expect("ten multipliers");
    let in_range = last >= POA_RANGE.0 && last <= POA_RANGE.1;
    report.record(
        4,
        failures.is_empty() && monotone && in_range && elapsed < SWEEP_BUDGET,
        format!(
            "{checked} fixtures within [1, bound], out of range: {failures:?}; sweep {:?}, {:.1} s",
            sweep.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_5(report: &mut Report) {
    let b1 = selfish_routing_bound(1.0);
    let b4 = selfish_routing_bound(4.0);
    let pass = (b1 - 4.0 / 3.0).abs() <= 1e-12 && (b4 - 2.1505).abs() <= BOUND_TOL;
    report.record(5, pass, format!("B(1) = {b1}, B(4) = {b4:.6}"));
}

fn share_of(r: &RunResult, catalog: &PathCatalog, pred: impl Fn(&str) -> bool) -> f64 {
    modal_share(catalog, &r.assignment)
        .iter()
        .filter(|(m, _)| pred(m))
        .map(|(_, v)| v)
        .sum()
}

/// Trip length of each OD pair: the shortest car path in the catalog.
fn od_lengths(s: &Scenario, catalog: &PathCatalog) -> BTreeMap<(u32, u32), f64> {
    let mut out: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for p in catalog.paths.iter().filter(|p| p.mode.label() == "car") {
        let e = out.entry((p.origin, p.destination)).or_insert(f64::INFINITY);
        *e = e.min(p.length(s));
    }
    out
}

/// Whether ridesharing serves only the shortest OD pairs while carpooling
/// also serves longer ones.
fn short_rides_long_carpools(s: &Scenario, catalog: &PathCatalog, r: &RunResult) -> (bool, String) {
    let lengths = od_lengths(s, catalog);
    let shortest = lengths.values().copied().fold(f64::INFINITY, f64::min);
    let mut ride: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut carpool: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (i, p) in catalog.paths.iter().enumerate() {
        let flow = r.assignment.path_flow[i];
        if flow <= 0.0 {
            continue;
        }
        match p.mode.label().as_str() {
            "RS" => *ride.entry((p.origin, p.destination)).or_default() += flow,
            "CP" => *carpool.entry((p.origin, p.destination)).or_default() += flow,
            _ => {}
        }
    }
    let ride_short = !ride.is_empty() && ride.keys().all(|od| lengths[od] == shortest);
    let carpool_long = carpool.keys().any(|od| lengths[od] > shortest);
    (
        ride_short && carpool_long,
        format!("RS on {:?}, CP on {:?}", ride.keys().collect::<Vec<_>>(), carpool.keys().collect::<Vec<_>>()),
    )
}

fn criterion_6(report: &mut Report, solved: &BTreeMap<String, Solved>) {
    let is_pt = |m: &str| m.split('&').all(|leg| leg == "bus" || leg == "M");
    let s1 = &solved["synth_s1.json"];
    let s1_ok = match (&s1.ue, &s1.so) {
        (Some(u), Some(o)) => {
            let identical = u.assignment.path_flow == o.assignment.path_flow && u.flows.link_flow == o.flows.link_flow;
            let pt = share_of(u, &s1.catalog, is_pt);
            (identical && pt >= PT_SHARE_MIN, format!("s1 identical flows {identical}, PT share {pt:.4}"))
        }
        _ => (false, "s1 unsolved".to_string()),
    };
    let s2 = &solved["synth_s2.json"];
    let s2_ok = match (&s2.ue, &s2.so) {
        (Some(u), Some(o)) => {
            let (pu, du) = short_rides_long_carpools(&s2.scenario, &s2.catalog, u);
            let (po, _) = short_rides_long_carpools(&s2.scenario, &s2.catalog, o);
            (pu && po, format!("s2 UE {du} (SO agrees: {po})"))
        }
        _ => (false, "s2 unsolved".to_string()),
    };
    let s3 = &solved["synth_s3.json"];
    let restricted = {
        let mut sc = s3.scenario.clone();
        sc.toggles.carpool_min_distance = Some(100.0);
        let catalog = PathCatalog::build(&sc);
        [Principle::Ue, Principle::So].map(|p| {
            run(&sc, &catalog, p, &RunOptions::default())
                .ok()
                .map(|r| share_of(&r, &catalog, |m| m.split('&').any(|l| l == "RS")))
        })
    };
    let open = [&s3.ue, &s3.so].map(|r| r.as_ref().map(|r| share_of(r, &s3.catalog, |m| m.split('&').any(|l| l == "RS"))));
    let s3_pass = open.iter().zip(&restricted).all(|(a, b)| matches!((a, b), (Some(a), Some(b)) if b > a));
    let s3_detail = format!("s3 RS share UE {:?} -> {:?}, SO {:?} -> {:?}", open[0], restricted[0], open[1], restricted[1]);
    report.record(
        6,
        s1_ok.0 && s2_ok.0 && s3_pass,
        format!("{}; {}; {s3_detail}", s1_ok.1, s2_ok.1),
    );
}

fn criterion_7(report: &mut Report, solved: &BTreeMap<String, Solved>) {
    const FAMILIES: [&str; 4] = ["demand_conservation", "fleet_size", "rideshare_no_solo", "parking_capacity"];
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, s) in solved {
        for r in [&s.ue, &s.so].into_iter().flatten() {
            let rep = check_assignment(&s.scenario, &s.catalog, &r.model.space, &r.assignment, true, 0.0);
            checked += 1;
            for f in FAMILIES {
                if !rep.of(f).is_empty() {
                    failures.push(format!("{name} {:?} {f}", r.principle));
                }
            }
        }
    }
    report.record(
        7,
        failures.is_empty() && checked > 0,
        format!("{checked} integer solutions checked with zero tolerance, failing: {failures:?}"),
    );
}

fn criterion_8(report: &mut Report, solved: &BTreeMap<String, Solved>) {
    let mut programs = 0;
    let mut failures = Vec::new();
    for (name, s) in solved {
        for principle in [Principle::Ue, Principle::So] {
            let model = match initial_model(&s.scenario, &s.catalog, principle, &RunOptions::default()) {
                Ok(m) => m,
                Err(e) => {
                    failures.push(format!("{name} {principle:?}: {e}"));
                    continue;
                }
            };
            let same = to_mps(&model.program)
                .ok()
                .and_then(|text| parse_mps(&text).ok())
                .is_some_and(|back| matrix_hash(&back) == matrix_hash(&model.program));
            programs += 1;
            if !same {
                failures.push(format!("{name} {principle:?}"));
            }
        }
    }
    let s3 = common::fixture("synth_s3.json");
    let catalog = PathCatalog::build(&s3);
    let timed = |p: Principle| {
        let start = Instant::now();
        let status = run(&s3, &catalog, p, &RunOptions::default()).map(|r| r.solution.status).ok();
        (status, start.elapsed())
    };
    let (so_status, so_time) = timed(Principle::So);
    let (ue_status, ue_time) = timed(Principle::Ue);
    let s3_ok = so_status == Some(SolveStatus::Optimal) && so_time < SOLVE_BUDGET;
    report.record(
        8,
        failures.is_empty() && s3_ok,
        format!(
            "{programs} programs round-trip through MPS, failing: {failures:?}; s3 SO {so_status:?} in {:.1} s (UE {ue_status:?} in {:.1} s)",
            so_time.as_secs_f64(),
            ue_time.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut report = Report { lines: Vec::new() };
    criterion_1(&mut report);
    let solved = solve_all();
    criterion_2(&mut report, &solved);
    criterion_3(&mut report);
    criterion_4(&mut report, &solved);
    criterion_5(&mut report);
    criterion_6(&mut report, &solved);
    criterion_7(&mut report, &solved);
    criterion_8(&mut report, &solved);
    let failed: Vec<usize> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
