//! Assembly of the traffic assignment program from a scenario and its path
//! catalog.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::bilinear::{linearize_bilinear_product, BilinearError};
use super::program::{BilinearTerm, ConstraintFamily as F, Epigraph, MathProgram, Sense, VarFamily as V};
use super::pwl::{chord_approximation, ConvexFn, Shape};
use crate::assignment::{Assignment, MatchingSpace};
use crate::costs::{free_flow_times, static_path_cost, Principle};
use crate::mode::{BaseMode, Subnetwork};
use crate::network::{NodeId, Scenario};
use crate::paths::PathCatalog;

/// How convex cost terms are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveApprox {
    /// Supporting cuts refined by the solver until the epigraph is exact at
    /// the returned solution.
    Refined,
    /// Fixed chord interpolation on the initial breakpoints.
    Chords,
}

/// How the waiting time of shared services enters the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitingForm {
    /// One convex term `value_of_time * q^2 / meeting_rate` per service,
    /// `q` being the number of its users.
    Aggregated,
    /// One product `q * x` per service and boarding link, linearized with a
    /// binary expansion of `q` (declared as a product term in continuous
    /// programs).
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildOptions {
    /// Integer flows (true) or their continuous relaxation.
    pub integer: bool,
    /// Number of uniform segments used for the initial cuts.
    pub segments: usize,
    pub approx: ObjectiveApprox,
    pub waiting: WaitingForm,
    /// In-vehicle time charged to passengers on road links, per link.
    /// Defaults to the free-flow time.
    pub passenger_time: Option<Vec<f64>>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            integer: true,
            segments: 8,
            approx: ObjectiveApprox::Refined,
            waiting: WaitingForm::Aggregated,
            passenger_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("catalog does not match the scenario: {0}")]
    CatalogMismatch(String),
    #[error("variable bound overflow: {0}")]
    Overflow(String),
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
}

/// Variable indices of every structured decision.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Layout {
    pub path_flow: Vec<usize>,
    pub driver_stops: Vec<usize>,
    pub ehail_vehicles: Vec<usize>,
    pub ride_vehicles: Vec<usize>,
    pub empty_vehicles: Vec<usize>,
    pub idle_vehicles: Option<usize>,
    pub rideshare_paths: Vec<(Vec<usize>, usize)>,
    pub link_flow: BTreeMap<usize, usize>,
    pub mode_link_flow: BTreeMap<(usize, BaseMode), usize>,
    pub mode_demand: BTreeMap<BaseMode, usize>,
    pub transit_units: BTreeMap<(BaseMode, usize), usize>,
    pub occupied: BTreeMap<(NodeId, NodeId), usize>,
    pub occupied_by_stop: BTreeMap<(NodeId, NodeId, NodeId), usize>,
    pub empty_count: BTreeMap<(NodeId, NodeId), usize>,
}

/// A built program with the information needed to read its solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltModel {
    pub program: MathProgram,
    pub space: MatchingSpace,
    pub layout: Layout,
    pub options: BuildOptions,
    /// Largest overestimate of the chord representation, summed over
    /// epigraphs (zero for refined cuts).
    pub approximation_bound: f64,
}

impl BuiltModel {
    /// Reads the structured decisions out of a solution vector.
    pub fn decode(&self, x: &[f64]) -> Assignment {
        let l = &self.layout;
        let pick = |ids: &Vec<usize>| ids.iter().map(|&j| x[j]).collect::<Vec<f64>>();
        Assignment {
            path_flow: pick(&l.path_flow),
            driver_stops: pick(&l.driver_stops),
            ehail_vehicles: pick(&l.ehail_vehicles),
            ride_vehicles: pick(&l.ride_vehicles),
            empty_vehicles: pick(&l.empty_vehicles),
            idle_vehicles: l.idle_vehicles.map_or(0.0, |j| x[j]),
            transit_units: l.transit_units.iter().map(|(k, &j)| (*k, x[j])).collect(),
        }
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

const MAX_EXACT: f64 = 9.0e15;

/// Builds the user-equilibrium or system-optimum program.
pub fn build_program(
    s: &Scenario,
    catalog: &PathCatalog,
    principle: Principle,
    opts: &BuildOptions,
) -> Result<BuiltModel, ModelError> {
    for (i, p) in catalog.paths.iter().enumerate() {
        if p.links().iter().any(|&a| a >= s.links.len()) {
            return Err(ModelError::CatalogMismatch(format!("path {i} references an unknown link")));
        }
        if !s.demand.iter().any(|d| d.origin == p.origin && d.destination == p.destination) {
            return Err(ModelError::CatalogMismatch(format!(
                "path {i} serves ({}, {}), which has no demand entry",
                p.origin, p.destination
            )));
        }
    }
    let total: u64 = s.total_demand();
    if total as f64 > MAX_EXACT || s.fleet_size as f64 > MAX_EXACT {
        return Err(ModelError::Overflow(format!(
            "demand {total} or fleet {} exceeds exact integer range",
            s.fleet_size
        )));
    }
    let q_total = total as f64;
    let integer = opts.integer;
    let alpha = s.params.value_of_time;
    let space = MatchingSpace::build(s, catalog);
    let mut p = MathProgram::new(format!("{}_{}", sanitize(&s.name), principle.code()));
    p.principle = Some(principle);
    let mut layout = Layout::default();
    let demand_of = |o: NodeId, d: NodeId| -> f64 {
        s.demand
            .iter()
            .find(|x| x.origin == o && x.destination == d)
            .map_or(0.0, |x| x.travellers as f64)
    };

    let passenger_time = match principle {
        Principle::Ue => opts.passenger_time.clone().unwrap_or_else(|| free_flow_times(s)),
        Principle::So => free_flow_times(s),
    };

    // Path flows and demand conservation.
    for (i, path) in catalog.paths.iter().enumerate() {
        let ub = demand_of(path.origin, path.destination);
        let j = p.add_var(format!("f_{i}"), 0.0, ub, integer, V::PathFlow);
        p.objective[j] = static_path_cost(s, path, &passenger_time);
        layout.path_flow.push(j);
    }
    for d in &s.demand {
        let mut terms = Vec::new();
        for key in catalog.keys().filter(|k| k.0 == d.origin && k.1 == d.destination) {
            for &i in catalog.ids(key.0, key.1, &key.2) {
                terms.push((layout.path_flow[i], 1.0));
            }
        }
        p.add_row(
            format!("demand_{}_{}", d.origin, d.destination),
            terms,
            Sense::Eq,
            d.travellers as f64,
            vec![F::DemandConservation],
        );
    }

    // Traveller flow per link and base mode.
    let mut contributions: BTreeMap<(usize, BaseMode), Vec<(usize, bool)>> = BTreeMap::new();
    for (i, path) in catalog.paths.iter().enumerate() {
        for leg in &path.legs {
            for &a in &leg.links {
                contributions
                    .entry((a, leg.mode))
                    .or_default()
                    .push((i, path.mode.is_intermodal()));
            }
        }
    }
    for ((a, m), users) in &contributions {
        let ub: f64 = users
            .iter()
            .map(|(i, _)| demand_of(catalog.paths[*i].origin, catalog.paths[*i].destination))
            .sum::<f64>()
            .min(q_total);
        let name = format!("xm_{}_{}", sanitize(&s.links[*a].id), m.code());
        let j = p.add_var(name.clone(), 0.0, ub, integer, V::LinkModeFlow);
        let mut terms = vec![(j, 1.0)];
        terms.extend(users.iter().map(|(i, _)| (layout.path_flow[*i], -1.0)));
        let mut fam = vec![F::LinkModeFlow];
        if users.iter().any(|u| u.1) {
            fam.push(F::IntermodalLinkModeFlow);
        }
        p.add_row(format!("{name}_def"), terms, Sense::Eq, 0.0, fam);
        layout.mode_link_flow.insert((*a, *m), j);
    }

    let is_intermodal = |i: usize| catalog.paths[i].mode.is_intermodal();
    let users_ub = |users: &[usize]| -> f64 {
        users
            .iter()
            .map(|&i| demand_of(catalog.paths[i].origin, catalog.paths[i].destination))
            .sum::<f64>()
            .min(q_total)
    };

    // Carpooling.
    let cap_cp = s.params.seats(BaseMode::CarpoolPassenger) as f64;
    for (k, st) in space.driver_stops.iter().enumerate() {
        let d = &catalog.paths[st.driver];
        let ub = demand_of(d.origin, d.destination);
        let j = p.add_var(format!("g_{k}"), 0.0, ub, integer, V::DriverStop);
        layout.driver_stops.push(j);
    }
    let mut drivers: BTreeSet<usize> = BTreeSet::new();
    for (i, path) in catalog.paths.iter().enumerate() {
        if path.legs.iter().any(|l| l.mode == BaseMode::CarpoolDriver) {
            drivers.insert(i);
        }
    }
    for &d in &drivers {
        let mut terms = vec![(layout.path_flow[d], 1.0)];
        for (k, st) in space.driver_stops.iter().enumerate() {
            if st.driver == d {
                terms.push((layout.driver_stops[k], -1.0));
            }
        }
        let mut fam = vec![F::DriverStops];
        if is_intermodal(d) {
            fam.push(F::IntermodalDriverPassengers);
        }
        p.add_row(format!("driver_stops_{d}"), terms, Sense::Eq, 0.0, fam);
    }
    for (h, leg) in space.carpool_legs.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = leg.users.iter().map(|&i| (layout.path_flow[i], 1.0)).collect();
        let mut intermodal_driver = false;
        for (k, st) in space.driver_stops.iter().enumerate() {
            if st.leg == h {
                terms.push((layout.driver_stops[k], -cap_cp));
                intermodal_driver |= is_intermodal(st.driver);
            }
        }
        let mut fam = vec![F::CarpoolSeats];
        if leg.users.iter().any(|&i| is_intermodal(i)) {
            fam.push(F::IntermodalCarpoolSeats);
        }
        if intermodal_driver {
            fam.push(F::IntermodalCarpoolCoupling);
        }
        p.add_row(format!("carpool_seats_{h}"), terms, Sense::Le, 0.0, fam);
    }
    for (k, st) in space.driver_stops.iter().enumerate() {
        let leg = &space.carpool_legs[st.leg];
        let mut terms = vec![(layout.driver_stops[k], 1.0)];
        terms.extend(leg.users.iter().map(|&i| (layout.path_flow[i], -1.0)));
        let mut fam = vec![F::DriverPassengers];
        if leg.users.iter().any(|&i| is_intermodal(i)) {
            fam.push(F::IntermodalDriverCoupling);
        }
        if is_intermodal(st.driver) {
            fam.push(F::IntermodalDriverPassengers);
        }
        p.add_row(format!("driver_passengers_{k}"), terms, Sense::Le, 0.0, fam);
    }

    // E-hailing vehicles.
    for (h, leg) in space.ehail_legs.iter().enumerate() {
        let ub = users_ub(&leg.users);
        let j = p.add_var(format!("yeh_{h}"), 0.0, ub, integer, V::EhailVehicles);
        layout.ehail_vehicles.push(j);
        let mut terms = vec![(j, 1.0)];
        terms.extend(leg.users.iter().map(|&i| (layout.path_flow[i], -1.0)));
        let mut fam = vec![F::EhailCoupling];
        if leg.users.iter().any(|&i| is_intermodal(i)) {
            fam.push(F::IntermodalEhailCoupling);
        }
        p.add_row(format!("ehail_{h}"), terms, Sense::Eq, 0.0, fam);
    }

    // Ridesharing.
    let cap_rs = s.params.seats(BaseMode::RideShare) as f64;
    for (k, pat) in space.ride_patterns.iter().enumerate() {
        let ub = users_ub(&space.rideshare_legs[pat.first].users)
            .min(users_ub(&space.rideshare_legs[pat.second].users));
        let j = p.add_var(format!("z_{k}"), 0.0, ub, integer, V::RideVehicles);
        layout.ride_vehicles.push(j);
    }
    let mut vehicle_paths: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (k, pat) in space.ride_patterns.iter().enumerate() {
        vehicle_paths.entry(pat.vehicle_links.clone()).or_default().push(k);
    }
    for (v, (links, pats)) in vehicle_paths.iter().enumerate() {
        let ub: f64 = pats.iter().map(|&k| p.variables[layout.ride_vehicles[k]].upper).sum();
        let j = p.add_var(format!("yrs_{v}"), 0.0, ub, integer, V::RideshareVehicles);
        let mut terms = vec![(j, 1.0)];
        terms.extend(pats.iter().map(|&k| (layout.ride_vehicles[k], -1.0)));
        p.add_row(format!("rideshare_vehicles_{v}"), terms, Sense::Eq, 0.0, vec![F::RideshareVehicles]);
        layout.rideshare_paths.push((links.clone(), j));
        let mut by_second: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &k in pats {
            by_second.entry(space.ride_patterns[k].second).or_default().push(k);
        }
        for (h, ks) in by_second {
            let leg = &space.rideshare_legs[h];
            let mut terms: Vec<(usize, f64)> = ks.iter().map(|&k| (layout.ride_vehicles[k], 1.0)).collect();
            terms.extend(leg.users.iter().map(|&i| (layout.path_flow[i], -1.0)));
            let mut fam = vec![F::RidesharePassengers];
            if leg.users.iter().any(|&i| is_intermodal(i)) {
                fam.push(F::IntermodalRidesharePassengers);
            }
            p.add_row(format!("rideshare_passengers_{v}_{h}"), terms, Sense::Le, 0.0, fam);
        }
    }
    for (h, leg) in space.rideshare_legs.iter().enumerate() {
        let intermodal = leg.users.iter().any(|&i| is_intermodal(i));
        let flow: Vec<(usize, f64)> = leg.users.iter().map(|&i| (layout.path_flow[i], 1.0)).collect();
        let mut seats = flow.clone();
        let mut exact = flow;
        for (k, pat) in space.ride_patterns.iter().enumerate() {
            let mult = pat.multiplicity(h) as f64;
            if mult > 0.0 {
                seats.push((layout.ride_vehicles[k], -cap_rs));
                exact.push((layout.ride_vehicles[k], -mult));
            }
        }
        let mut fam = vec![F::RideshareSeats];
        if intermodal {
            fam.push(F::IntermodalRideshareSeats);
        }
        p.add_row(format!("rideshare_seats_{h}"), seats, Sense::Le, 0.0, fam);
        let mut fam = vec![F::RideshareNoSolo];
        if intermodal {
            fam.push(F::IntermodalRidesharePassengers);
        }
        p.add_row(format!("rideshare_pairing_{h}"), exact, Sense::Eq, 0.0, fam);
    }

    // Fleet.
    let fleet_size = s.fleet_size as f64;
    if space.fleet {
        for k in 0..space.empty_trips.len() {
            let j = p.add_var(format!("ye_{k}"), 0.0, fleet_size, integer, V::EmptyVehicles);
            layout.empty_vehicles.push(j);
        }
        let mut by_stop: BTreeMap<(NodeId, NodeId, NodeId), Vec<usize>> = BTreeMap::new();
        for (k, pat) in space.ride_patterns.iter().enumerate() {
            by_stop.entry((pat.start(), pat.end(), pat.stops[1])).or_default().push(k);
        }
        let mut occupied_terms: BTreeMap<(NodeId, NodeId), Vec<(usize, f64)>> = BTreeMap::new();
        for ((u, v, r), ks) in by_stop {
            let ub: f64 = ks.iter().map(|&k| p.variables[layout.ride_vehicles[k]].upper).sum();
            let j = p.add_var(format!("qor_{u}_{v}_{r}"), 0.0, ub.min(fleet_size), integer, V::OccupiedByStop);
            let mut terms = vec![(j, 1.0)];
            terms.extend(ks.iter().map(|&k| (layout.ride_vehicles[k], -1.0)));
            p.add_row(format!("occupied_stop_{u}_{v}_{r}"), terms, Sense::Eq, 0.0, vec![F::OccupiedByStop]);
            layout.occupied_by_stop.insert((u, v, r), j);
            occupied_terms.entry((u, v)).or_default().push((j, -1.0));
        }
        for (h, leg) in space.ehail_legs.iter().enumerate() {
            occupied_terms
                .entry((leg.from, leg.to))
                .or_default()
                .push((layout.ehail_vehicles[h], -1.0));
        }
        for ((u, v), mut terms) in occupied_terms {
            let ub: f64 = terms.iter().map(|&(j, _)| p.variables[j].upper).sum();
            let j = p.add_var(format!("qo_{u}_{v}"), 0.0, ub.min(fleet_size), integer, V::OccupiedVehicles);
            terms.push((j, 1.0));
            p.add_row(format!("occupied_{u}_{v}"), terms, Sense::Eq, 0.0, vec![F::OccupiedVehicles]);
            layout.occupied.insert((u, v), j);
        }
        let mut empty_terms: BTreeMap<(NodeId, NodeId), Vec<(usize, f64)>> = BTreeMap::new();
        for (k, e) in space.empty_trips.iter().enumerate() {
            empty_terms
                .entry((e.from, e.to))
                .or_default()
                .push((layout.empty_vehicles[k], -1.0));
        }
        for ((u, v), mut terms) in empty_terms {
            let j = p.add_var(format!("qe_{u}_{v}"), 0.0, fleet_size, integer, V::EmptyCount);
            terms.push((j, 1.0));
            p.add_row(format!("empty_{u}_{v}"), terms, Sense::Eq, 0.0, vec![F::EmptyVehicles]);
            layout.empty_count.insert((u, v), j);
        }
        let balance_nodes: BTreeSet<NodeId> = s.destinations().into_iter().chain(space.dropoff_nodes()).collect();
        for &n in &balance_nodes {
            let mut terms = Vec::new();
            for (&(u, v), &j) in layout.occupied.iter().chain(layout.empty_count.iter()) {
                if v == n {
                    terms.push((j, 1.0));
                }
                if u == n {
                    terms.push((j, -1.0));
                }
            }
            if !terms.is_empty() {
                p.add_row(format!("node_balance_{n}"), terms, Sense::Eq, 0.0, vec![F::NodeBalance]);
            }
        }
        let pickup_nodes: BTreeSet<NodeId> = s.origins().into_iter().chain(space.pickup_nodes()).collect();
        for &n in &pickup_nodes {
            let mut terms = Vec::new();
            for (&(_, v), &j) in &layout.empty_count {
                if v == n {
                    terms.push((j, 1.0));
                }
            }
            for (&(u, _), &j) in &layout.occupied {
                if u == n {
                    terms.push((j, -1.0));
                }
            }
            if !terms.is_empty() {
                p.add_row(format!("pickup_{n}"), terms, Sense::Ge, 0.0, vec![F::PickupAvailability]);
            }
        }
        let idle = p.add_var("idle", 0.0, fleet_size, integer, V::IdleVehicles);
        layout.idle_vehicles = Some(idle);
        let mut terms = vec![(idle, 1.0)];
        terms.extend(layout.occupied.values().map(|&j| (j, 1.0)));
        terms.extend(layout.empty_count.values().map(|&j| (j, 1.0)));
        p.add_row("fleet_size", terms, Sense::Eq, fleet_size, vec![F::FleetSize]);
    }

    // Transit capacity.
    let pce = s.params.bus_pce;
    let mut unit_offset = vec![0.0; s.links.len()];
    for mode in [BaseMode::Bus, BaseMode::Metro] {
        let cap = s.line_capacity(mode);
        let veh = s.vehicle_capacity(mode);
        for a in 0..s.links.len() {
            let freq = s.frequency_on(mode, a);
            if freq <= 0.0 {
                continue;
            }
            let xm = layout.mode_link_flow.get(&(a, mode)).copied();
            if s.toggles.pt_adaptive {
                let lo = freq.ceil();
                let ub = lo + (q_total / veh[a]).ceil();
                let u = p.add_var(
                    format!("u_{}_{}", mode.code(), sanitize(&s.links[a].id)),
                    lo,
                    ub,
                    integer,
                    V::TransitUnits,
                );
                layout.transit_units.insert((mode, a), u);
                if let Some(xm) = xm {
                    p.add_row(
                        format!("transit_units_{}_{}", mode.code(), sanitize(&s.links[a].id)),
                        vec![(xm, 1.0), (u, -veh[a])],
                        Sense::Le,
                        0.0,
                        vec![F::TransitUnits],
                    );
                }
            } else {
                if mode == BaseMode::Bus {
                    unit_offset[a] += pce * freq;
                }
                if let Some(xm) = xm {
                    p.add_row(
                        format!("transit_capacity_{}_{}", mode.code(), sanitize(&s.links[a].id)),
                        vec![(xm, 1.0)],
                        Sense::Le,
                        cap[a],
                        vec![F::TransitCapacity],
                    );
                }
            }
            if mode == BaseMode::Metro && principle == Principle::So {
                let t = alpha * s.links[a].length / s.params.speed(Subnetwork::Metro);
                match layout.transit_units.get(&(mode, a)) {
                    Some(&u) => p.objective[u] += t,
                    None => p.objective_offset += t * freq,
                }
            }
        }
    }

    // Parking at transfer nodes.
    let mut parking: BTreeMap<NodeId, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, path) in catalog.paths.iter().enumerate() {
        if path.mode.is_intermodal() && path.legs[0].mode.needs_parking() {
            if let Some(t) = path.transfer_node(s) {
                parking.entry(t).or_default().push((layout.path_flow[i], 1.0));
            }
        }
    }
    for (t, terms) in parking {
        let cap = s.parking_capacity.get(&t).copied().unwrap_or(0) as f64;
        p.add_row(format!("parking_{t}"), terms, Sense::Le, cap, vec![F::ParkingCapacity]);
    }

    // Road link flows and their congestion terms.
    let mut approximation_bound = 0.0;
    for (a, link) in s.links.iter().enumerate() {
        if link.subnetwork != Subnetwork::Road {
            continue;
        }
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for m in [BaseMode::Car, BaseMode::CarpoolDriver] {
            if let Some(&j) = layout.mode_link_flow.get(&(a, m)) {
                terms.push((j, -1.0));
            }
        }
        for (h, leg) in space.ehail_legs.iter().enumerate() {
            if leg.links.contains(&a) {
                terms.push((layout.ehail_vehicles[h], -1.0));
            }
        }
        for (links, j) in &layout.rideshare_paths {
            if links.contains(&a) {
                terms.push((*j, -1.0));
            }
        }
        for (k, e) in space.empty_trips.iter().enumerate() {
            if e.links.contains(&a) {
                terms.push((layout.empty_vehicles[k], -1.0));
            }
        }
        if let Some(&u) = layout.transit_units.get(&(BaseMode::Bus, a)) {
            terms.push((u, -pce));
        }
        let lower = unit_offset[a]
            + layout
                .transit_units
                .get(&(BaseMode::Bus, a))
                .map_or(0.0, |&u| pce * p.variables[u].lower);
        let upper = unit_offset[a]
            + terms
                .iter()
                .map(|&(j, c)| -c * p.variables[j].upper)
                .sum::<f64>();
        let lattice_ok = integer && (lower - lower.round()).abs() < 1e-9 && (pce - pce.round()).abs() < 1e-9;
        let x = p.add_var(
            format!("x_{}", sanitize(&link.id)),
            lower,
            upper,
            lattice_ok,
            V::LinkFlow,
        );
        terms.push((x, 1.0));
        p.add_row(
            format!("link_flow_{}", sanitize(&link.id)),
            terms,
            Sense::Eq,
            unit_offset[a],
            vec![F::LinkAggregation],
        );
        layout.link_flow.insert(a, x);

        let (t0, delay, capacity, beta) = (link.t0, s.link_delay(link), link.capacity, s.params.bpr_beta);
        let shape = match (principle, lattice_ok) {
            (Principle::Ue, true) => Shape::BprSum {
                t0,
                delay,
                capacity,
                beta,
                origin: lower,
            },
            (Principle::Ue, false) => Shape::BprIntegral {
                t0,
                delay,
                capacity,
                beta,
            },
            (Principle::So, _) => Shape::BprTotal {
                t0,
                delay,
                capacity,
                beta,
            },
        };
        let mut f = ConvexFn::new(shape, alpha);
        if lattice_ok {
            f = f.on_lattice(lower);
        }
        let x_max = upper.max(2.0 * capacity).max(lower + 1.0);
        approximation_bound += add_epigraph(
            &mut p,
            &format!("theta_{}", sanitize(&link.id)),
            x,
            f,
            lower,
            upper,
            x_max,
            opts,
            F::CongestionEpigraph,
        );
    }

    // Waiting time of shared services.
    for m in [BaseMode::CarpoolPassenger, BaseMode::EHail, BaseMode::RideShare] {
        let users: Vec<(usize, usize)> = catalog
            .paths
            .iter()
            .enumerate()
            .map(|(i, path)| (i, path.legs.iter().filter(|l| l.mode == m).count()))
            .filter(|&(_, c)| c > 0)
            .collect();
        if users.is_empty() {
            continue;
        }
        let ub = users
            .iter()
            .map(|&(i, c)| c as f64 * demand_of(catalog.paths[i].origin, catalog.paths[i].destination))
            .sum::<f64>();
        let q = p.add_var(format!("q_{}", m.code()), 0.0, ub, integer, V::ModeDemand);
        layout.mode_demand.insert(m, q);
        let mut terms = vec![(q, 1.0)];
        terms.extend(users.iter().map(|&(i, c)| (layout.path_flow[i], -(c as f64))));
        p.add_row(format!("mode_demand_{}", m.code()), terms, Sense::Eq, 0.0, vec![F::ModeDemand]);
        let coef = alpha / s.params.meeting_rate(m);
        match opts.waiting {
            WaitingForm::Aggregated => {
                let mut f = ConvexFn::new(Shape::Square, coef);
                if integer {
                    f = f.on_lattice(0.0);
                }
                approximation_bound += add_epigraph(
                    &mut p,
                    &format!("wait_{}", m.code()),
                    q,
                    f,
                    0.0,
                    ub,
                    ub.max(1.0),
                    opts,
                    F::WaitingEpigraph,
                );
            }
            WaitingForm::Binary => {
                let mut boarding: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &(i, _) in &users {
                    for leg in catalog.paths[i].legs.iter().filter(|l| l.mode == m) {
                        boarding.entry(leg.links[0]).or_default().push(i);
                    }
                }
                let mut total = vec![(q, 1.0)];
                for (a, who) in boarding {
                    let ub = users_ub(&who);
                    let name = format!("xo_{}_{}", sanitize(&s.links[a].id), m.code());
                    let xo = p.add_var(name.clone(), 0.0, ub, integer, V::OriginLinkFlow);
                    let mut terms = vec![(xo, 1.0)];
                    terms.extend(who.iter().map(|&i| (layout.path_flow[i], -1.0)));
                    p.add_row(format!("{name}_def"), terms, Sense::Eq, 0.0, vec![F::LinkModeFlow]);
                    total.push((xo, -1.0));
                    if integer {
                        let z = linearize_bilinear_product(&mut p, q, xo, &format!("w_{}_{}", sanitize(&s.links[a].id), m.code()))?;
                        p.objective[z] += coef;
                    } else {
                        p.bilinear.push(BilinearTerm {
                            left: q,
                            right: xo,
                            coef,
                        });
                    }
                }
                p.add_row(format!("boarding_total_{}", m.code()), total, Sense::Eq, 0.0, vec![F::ModeDemand]);
            }
        }
    }

    Ok(BuiltModel {
        program: p,
        space,
        layout,
        options: opts.clone(),
        approximation_bound,
    })
}

/// Adds `value >= f(argument)` with its initial cuts and returns the
/// largest overestimate of the chord representation (zero for supports).
#[allow(clippy::too_many_arguments)]
fn add_epigraph(
    p: &mut MathProgram,
    name: &str,
    argument: usize,
    f: ConvexFn,
    lower: f64,
    upper: f64,
    x_max: f64,
    opts: &BuildOptions,
    family: F,
) -> f64 {
    let segments = opts.segments.max(2);
    let hi = x_max.max(lower + 1e-9);
    let mut gap = 0.0;
    let cuts = match opts.approx {
        ObjectiveApprox::Chords => {
            let approx = chord_approximation(&f, lower, hi, segments).expect("segments >= 2 and non-empty interval");
            gap = approx.max_gap;
            approx.cuts
        }
        ObjectiveApprox::Refined => {
            let h = (hi - lower) / segments as f64;
            let mut cuts: Vec<_> = (0..=segments).map(|k| f.support(lower + h * k as f64)).collect();
            cuts.dedup();
            cuts
        }
    };
    let top = cuts
        .iter()
        .map(|c| c.at(upper))
        .fold(f.eval(upper.max(lower)), f64::max);
    let value = p.add_var(name, f.eval(lower), top, false, V::Epigraph);
    p.objective[value] = 1.0;
    for (k, c) in cuts.iter().enumerate() {
        p.add_row(
            format!("{name}_cut{k}"),
            vec![(value, 1.0), (argument, -c.slope)],
            Sense::Ge,
            c.intercept,
            vec![family],
        );
    }
    if opts.approx == ObjectiveApprox::Refined {
        p.epigraphs.push(Epigraph {
            value,
            argument,
            function: f,
            family,
        });
    }
    gap
}
