//! Feasibility checks of an [`Assignment`] computed directly from the
//! scenario, the path catalog and the matching space.
//!
//! Nothing here reads the optimization program: every condition is
//! recomputed from the structured decision values, so the checks can
//! audit solutions produced by any method.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::assignment::{Assignment, MatchingSpace};
use crate::mode::BaseMode;
use crate::network::{NodeId, Scenario};
use crate::paths::PathCatalog;

/// One failed condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Breach {
    /// Condition family, for instance `demand_conservation`.
    pub family: &'static str,
    pub message: String,
    /// How far the values are from satisfying the condition.
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckReport {
    pub breaches: Vec<Breach>,
}

impl CheckReport {
    pub fn is_feasible(&self) -> bool {
        self.breaches.is_empty()
    }

    /// Breaches of one family.
    pub fn of(&self, family: &str) -> Vec<&Breach> {
        self.breaches.iter().filter(|b| b.family == family).collect()
    }
}

struct Checker {
    tol: f64,
    report: CheckReport,
}

impl Checker {
    fn eq(&mut self, family: &'static str, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        if (lhs - rhs).abs() > self.tol {
            self.report.breaches.push(Breach {
                family,
                message: format!("{}: {lhs} != {rhs}", what()),
                amount: (lhs - rhs).abs(),
            });
        }
    }

    fn le(&mut self, family: &'static str, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        if lhs > rhs + self.tol {
            self.report.breaches.push(Breach {
                family,
                message: format!("{}: {lhs} > {rhs}", what()),
                amount: lhs - rhs,
            });
        }
    }
}

/// Checks every structural condition on `a`. With `integer` set, all
/// values must also be whole numbers. `tol` is the absolute slack allowed
/// on each comparison; pass 0 for exact integer arithmetic.
pub fn check_assignment(
    s: &Scenario,
    catalog: &PathCatalog,
    space: &MatchingSpace,
    a: &Assignment,
    integer: bool,
    tol: f64,
) -> CheckReport {
    let mut c = Checker {
        tol,
        report: CheckReport::default(),
    };
    let shapes = [
        ("path_flow", a.path_flow.len(), catalog.len()),
        ("driver_stops", a.driver_stops.len(), space.driver_stops.len()),
        ("ehail_vehicles", a.ehail_vehicles.len(), space.ehail_legs.len()),
        ("ride_vehicles", a.ride_vehicles.len(), space.ride_patterns.len()),
        ("empty_vehicles", a.empty_vehicles.len(), space.empty_trips.len()),
    ];
    for (name, got, want) in shapes {
        if got != want {
            c.report.breaches.push(Breach {
                family: "shape",
                message: format!("{name} has {got} entries, expected {want}"),
                amount: f64::INFINITY,
            });
            return c.report;
        }
    }

    let all_values = a
        .path_flow
        .iter()
        .chain(&a.driver_stops)
        .chain(&a.ehail_vehicles)
        .chain(&a.ride_vehicles)
        .chain(&a.empty_vehicles)
        .chain(std::iter::once(&a.idle_vehicles))
        .chain(a.transit_units.values());
    for &v in all_values {
        if v < -tol {
            c.report.breaches.push(Breach {
                family: "domain",
                message: format!("negative value {v}"),
                amount: -v,
            });
        }
        if integer && (v - v.round()).abs() > tol {
            c.report.breaches.push(Breach {
                family: "domain",
                message: format!("fractional value {v}"),
                amount: (v - v.round()).abs(),
            });
        }
    }

    // Every traveller takes exactly one option.
    for d in &s.demand {
        let total: f64 = catalog
            .paths
            .iter()
            .enumerate()
            .filter(|(_, p)| p.origin == d.origin && p.destination == d.destination)
            .map(|(i, _)| a.path_flow[i])
            .sum();
        c.eq(
            "demand_conservation",
            || format!("OD ({}, {})", d.origin, d.destination),
            total,
            d.travellers as f64,
        );
    }
    for (i, p) in catalog.paths.iter().enumerate() {
        if !s.demand.iter().any(|d| d.origin == p.origin && d.destination == p.destination) {
            c.eq("demand_conservation", || format!("path {i} without demand"), a.path_flow[i], 0.0);
        }
    }

    check_carpool(&mut c, s, catalog, space, a);
    check_ehail(&mut c, space, a);
    check_rideshare(&mut c, s, space, a);
    if space.fleet {
        check_fleet(&mut c, s, space, a);
    }
    check_parking(&mut c, s, catalog, a);
    check_transit(&mut c, s, catalog, a);
    c.report
}

/// Travellers of `users` (catalog ids).
fn users_flow(a: &Assignment, users: &[usize]) -> f64 {
    users.iter().map(|&i| a.path_flow[i]).sum()
}

fn check_carpool(c: &mut Checker, s: &Scenario, catalog: &PathCatalog, space: &MatchingSpace, a: &Assignment) {
    let seats = s.params.seats(BaseMode::CarpoolPassenger) as f64;
    let mut stops_of_driver: BTreeMap<usize, f64> = BTreeMap::new();
    let mut stops_on_leg: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, st) in space.driver_stops.iter().enumerate() {
        *stops_of_driver.entry(st.driver).or_default() += a.driver_stops[k];
        *stops_on_leg.entry(st.leg).or_default() += a.driver_stops[k];
        let passengers = users_flow(a, &space.carpool_legs[st.leg].users);
        c.le("driver_passengers", || format!("driver stop {k}"), a.driver_stops[k], passengers);
    }
    for (i, p) in catalog.paths.iter().enumerate() {
        if p.legs.iter().any(|l| l.mode == BaseMode::CarpoolDriver) {
            let stops = stops_of_driver.get(&i).copied().unwrap_or(0.0);
            c.eq("driver_stops", || format!("driver path {i}"), a.path_flow[i], stops);
        }
    }
    for (h, leg) in space.carpool_legs.iter().enumerate() {
        let drivers = stops_on_leg.get(&h).copied().unwrap_or(0.0);
        c.le(
            "carpool_seats",
            || format!("carpool leg {h}"),
            users_flow(a, &leg.users),
            seats * drivers,
        );
    }
}

fn check_ehail(c: &mut Checker, space: &MatchingSpace, a: &Assignment) {
    for (h, leg) in space.ehail_legs.iter().enumerate() {
        c.eq(
            "ehail_coupling",
            || format!("e-hailing leg {h}"),
            a.ehail_vehicles[h],
            users_flow(a, &leg.users),
        );
    }
}

fn check_rideshare(c: &mut Checker, s: &Scenario, space: &MatchingSpace, a: &Assignment) {
    let seats = s.params.seats(BaseMode::RideShare) as f64;
    for (h, leg) in space.rideshare_legs.iter().enumerate() {
        let passengers = users_flow(a, &leg.users);
        let mut carried = 0.0;
        let mut vehicles = 0.0;
        for (k, pat) in space.ride_patterns.iter().enumerate() {
            let n = (pat.first == h) as u32 + (pat.second == h) as u32;
            if n > 0 {
                carried += n as f64 * a.ride_vehicles[k];
                vehicles += a.ride_vehicles[k];
            }
        }
        // Every rideshare passenger is paired: a vehicle on a single leg
        // carries two of its passengers, a vehicle on two legs one of each.
        c.eq("rideshare_no_solo", || format!("rideshare leg {h}"), passengers, carried);
        c.le("rideshare_seats", || format!("rideshare leg {h}"), passengers, seats * vehicles);
    }
}

fn check_fleet(c: &mut Checker, s: &Scenario, space: &MatchingSpace, a: &Assignment) {
    // Occupied and empty vehicle counts per (start, end) node pair.
    let mut occupied: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for (k, pat) in space.ride_patterns.iter().enumerate() {
        *occupied.entry((pat.stops[0], pat.stops[3])).or_default() += a.ride_vehicles[k];
    }
    for (h, leg) in space.ehail_legs.iter().enumerate() {
        *occupied.entry((leg.from, leg.to)).or_default() += a.ehail_vehicles[h];
    }
    let mut empty: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    for (k, e) in space.empty_trips.iter().enumerate() {
        *empty.entry((e.from, e.to)).or_default() += a.empty_vehicles[k];
    }
    let busy: f64 = occupied.values().sum::<f64>() + empty.values().sum::<f64>();
    c.eq(
        "fleet_size",
        || "occupied + empty + idle vehicles".to_string(),
        busy + a.idle_vehicles,
        s.fleet_size as f64,
    );

    let mut ends: BTreeSet<NodeId> = s.destinations();
    let mut starts: BTreeSet<NodeId> = s.origins();
    for &(u, v) in occupied.keys() {
        starts.insert(u);
        ends.insert(v);
    }
    let inflow = |n: NodeId| -> f64 {
        occupied.iter().chain(&empty).filter(|((_, v), _)| *v == n).map(|(_, x)| x).sum()
    };
    let outflow = |n: NodeId| -> f64 {
        occupied.iter().chain(&empty).filter(|((u, _), _)| *u == n).map(|(_, x)| x).sum()
    };
    for &n in &ends {
        c.eq("node_balance", || format!("node {n}"), inflow(n), outflow(n));
    }
    for &n in &starts {
        let empty_in: f64 = empty.iter().filter(|((_, v), _)| *v == n).map(|(_, x)| x).sum();
        let occupied_out: f64 = occupied.iter().filter(|((u, _), _)| *u == n).map(|(_, x)| x).sum();
        c.le("pickup_availability", || format!("node {n}"), occupied_out, empty_in);
    }
}

fn check_parking(c: &mut Checker, s: &Scenario, catalog: &PathCatalog, a: &Assignment) {
    let mut used: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (i, p) in catalog.paths.iter().enumerate() {
        if p.legs.len() < 2 || !matches!(p.legs[0].mode, BaseMode::Car | BaseMode::CarpoolDriver) {
            continue;
        }
        let last = *p.legs[0].links.last().expect("non-empty leg");
        *used.entry(s.links[last].head).or_default() += a.path_flow[i];
    }
    for (t, x) in used {
        let cap = s.parking_capacity.get(&t).copied().unwrap_or(0) as f64;
        c.le("parking_capacity", || format!("transfer node {t}"), x, cap);
    }
}

fn check_transit(c: &mut Checker, s: &Scenario, catalog: &PathCatalog, a: &Assignment) {
    let mut load: BTreeMap<(BaseMode, usize), f64> = BTreeMap::new();
    for (i, p) in catalog.paths.iter().enumerate() {
        for leg in p.legs.iter().filter(|l| matches!(l.mode, BaseMode::Bus | BaseMode::Metro)) {
            for &l in &leg.links {
                *load.entry((leg.mode, l)).or_default() += a.path_flow[i];
            }
        }
    }
    for ((mode, l), x) in load {
        let id = &s.links[l].id;
        let mut scheduled = 0.0;
        let mut vehicle: f64 = 0.0;
        let mut capacity = 0.0;
        for line in s.pt_lines.iter().filter(|line| line.mode == mode) {
            for (lid, f) in line.links.iter().zip(&line.frequency) {
                if lid == id {
                    scheduled += f;
                    capacity += f * line.veh_capacity;
                    vehicle = vehicle.max(line.veh_capacity);
                }
            }
        }
        if s.toggles.pt_adaptive {
            let units = a.transit_units.get(&(mode, l)).copied().unwrap_or(scheduled);
            c.le("transit_units", || format!("{mode} units on {id}"), scheduled.ceil(), units);
            c.le("transit_units", || format!("{mode} load on {id}"), x, vehicle * units);
        } else {
            c.le("transit_capacity", || format!("{mode} load on {id}"), x, capacity);
        }
    }
}
