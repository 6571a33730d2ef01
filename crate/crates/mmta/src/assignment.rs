//! Matching structures and structured decision values.
//!
//! [`MatchingSpace`] lists every way travellers of the shared modes can be
//! served: which carpool drivers can stop for which passenger legs, which
//! pairs of ridesharing legs can share a vehicle, which e-hailing trips
//! exist and which empty repositioning trips the fleet may make.
//! [`Assignment`] holds one value per element of that space together with
//! the path flows.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::mode::BaseMode;
use crate::network::{NodeId, Scenario};
use crate::paths::{is_contiguous_subsequence, leg_paths, PathCatalog};

/// A carpool driver option stopping to serve one passenger leg.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DriverStop {
    /// Catalog index of the driver's path.
    pub driver: usize,
    /// Index into [`MatchingSpace::carpool_legs`].
    pub leg: usize,
    pub pickup: NodeId,
    pub dropoff: NodeId,
}

/// A distinct link sequence travelled on a shared mode, with the catalog
/// paths that use it as one of their legs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SharedLeg {
    pub mode: BaseMode,
    pub links: Vec<usize>,
    pub from: NodeId,
    pub to: NodeId,
    pub users: Vec<usize>,
}

/// Stop order of a ridesharing vehicle carrying two passengers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopOrder {
    /// Both passengers share the same leg.
    Same,
    /// First picked up, first dropped off.
    Fifo,
    /// First picked up, last dropped off.
    Lifo,
}

/// A ridesharing vehicle trip serving two passenger legs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RidePattern {
    /// Index into [`MatchingSpace::rideshare_legs`] of the leg boarded first.
    pub first: usize,
    /// Index of the leg boarded second (equal to `first` for [`StopOrder::Same`]).
    pub second: usize,
    pub order: StopOrder,
    /// Links driven by the vehicle.
    pub vehicle_links: Vec<usize>,
    /// Stops: first pickup, second pickup, first drop-off, last drop-off.
    pub stops: [NodeId; 4],
}

impl RidePattern {
    /// How many of the two passengers travel on rideshare leg `h`.
    pub fn multiplicity(&self, h: usize) -> u32 {
        (self.first == h) as u32 + (self.second == h) as u32
    }

    pub fn start(&self) -> NodeId {
        self.stops[0]
    }

    pub fn end(&self) -> NodeId {
        self.stops[3]
    }
}

/// An empty repositioning trip path between two fleet nodes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EmptyTrip {
    pub from: NodeId,
    pub to: NodeId,
    pub links: Vec<usize>,
}

/// Everything the matching and fleet constraints range over.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MatchingSpace {
    pub carpool_legs: Vec<SharedLeg>,
    pub driver_stops: Vec<DriverStop>,
    pub ehail_legs: Vec<SharedLeg>,
    pub rideshare_legs: Vec<SharedLeg>,
    pub ride_patterns: Vec<RidePattern>,
    pub empty_trips: Vec<EmptyTrip>,
    /// Whether the shared fleet is modelled at all.
    pub fleet: bool,
}

fn node_sequence(s: &Scenario, links: &[usize]) -> Vec<NodeId> {
    let mut out = vec![s.links[links[0]].tail];
    out.extend(links.iter().map(|&a| s.links[a].head));
    out
}

fn shared_legs(s: &Scenario, catalog: &PathCatalog, mode: BaseMode) -> Vec<SharedLeg> {
    let mut by_links: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (id, p) in catalog.paths.iter().enumerate() {
        for leg in p.legs.iter().filter(|l| l.mode == mode) {
            by_links.entry(leg.links.clone()).or_default().push(id);
        }
    }
    by_links
        .into_iter()
        .map(|(links, users)| SharedLeg {
            mode,
            from: s.links[links[0]].tail,
            to: s.links[*links.last().expect("non-empty leg")].head,
            links,
            users,
        })
        .collect()
}

/// Position of `inner` as a contiguous block of `outer`.
fn block_position(inner: &[usize], outer: &[usize]) -> Option<usize> {
    if inner.is_empty() || inner.len() > outer.len() {
        return None;
    }
    outer.windows(inner.len()).position(|w| w == inner)
}

fn ride_patterns(s: &Scenario, legs: &[SharedLeg]) -> Vec<RidePattern> {
    let mut out = Vec::new();
    for (i, a) in legs.iter().enumerate() {
        out.push(RidePattern {
            first: i,
            second: i,
            order: StopOrder::Same,
            vehicle_links: a.links.clone(),
            stops: [a.from, a.from, a.to, a.to],
        });
        for (j, b) in legs.iter().enumerate() {
            if i == j {
                continue;
            }
            // b nested strictly inside a: board a, board b, drop b, drop a.
            if block_position(&b.links, &a.links).is_some() {
                out.push(RidePattern {
                    first: i,
                    second: j,
                    order: StopOrder::Lifo,
                    vehicle_links: a.links.clone(),
                    stops: [a.from, b.from, b.to, a.to],
                });
                continue;
            }
            // a boards first and leaves first; the tail of a equals the head of b.
            for k in 1..a.links.len() {
                let overlap = &a.links[k..];
                if b.links.len() > overlap.len() && b.links.starts_with(overlap) {
                    let mut vehicle = a.links[..k].to_vec();
                    vehicle.extend(&b.links);
                    let nodes = node_sequence(s, &vehicle);
                    let distinct: BTreeSet<_> = nodes.iter().collect();
                    if distinct.len() == nodes.len() {
                        out.push(RidePattern {
                            first: i,
                            second: j,
                            order: StopOrder::Fifo,
                            vehicle_links: vehicle,
                            stops: [a.from, b.from, a.to, b.to],
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out
}

impl MatchingSpace {
    pub fn build(s: &Scenario, catalog: &PathCatalog) -> Self {
        let carpool_legs = shared_legs(s, catalog, BaseMode::CarpoolPassenger);
        let mut driver_stops = Vec::new();
        for (d, p) in catalog.paths.iter().enumerate() {
            for leg in p.legs.iter().filter(|l| l.mode == BaseMode::CarpoolDriver) {
                for (h, cp) in carpool_legs.iter().enumerate() {
                    if is_contiguous_subsequence(&cp.links, &leg.links) {
                        driver_stops.push(DriverStop {
                            driver: d,
                            leg: h,
                            pickup: cp.from,
                            dropoff: cp.to,
                        });
                    }
                }
            }
        }
        let ehail_legs = shared_legs(s, catalog, BaseMode::EHail);
        let rideshare_legs = shared_legs(s, catalog, BaseMode::RideShare);
        let ride_patterns = ride_patterns(s, &rideshare_legs);

        let fleet = s
            .offered_modes()
            .iter()
            .any(|m| m.legs().iter().any(|b| b.uses_fleet()));
        let mut starts = BTreeSet::new();
        let mut ends = BTreeSet::new();
        for l in &ehail_legs {
            starts.insert(l.from);
            ends.insert(l.to);
        }
        for p in &ride_patterns {
            starts.insert(p.start());
            ends.insert(p.end());
        }
        let mut empty_trips = Vec::new();
        if fleet {
            for &from in &ends {
                for &to in &starts {
                    for links in leg_paths(s, from, to, BaseMode::EHail, s.toggles.max_paths) {
                        empty_trips.push(EmptyTrip { from, to, links });
                    }
                }
            }
        }
        MatchingSpace {
            carpool_legs,
            driver_stops,
            ehail_legs,
            rideshare_legs,
            ride_patterns,
            empty_trips,
            fleet,
        }
    }

    /// Nodes where occupied fleet trips start.
    pub fn pickup_nodes(&self) -> BTreeSet<NodeId> {
        self.ehail_legs
            .iter()
            .map(|l| l.from)
            .chain(self.ride_patterns.iter().map(RidePattern::start))
            .collect()
    }

    /// Nodes where occupied fleet trips end.
    pub fn dropoff_nodes(&self) -> BTreeSet<NodeId> {
        self.ehail_legs
            .iter()
            .map(|l| l.to)
            .chain(self.ride_patterns.iter().map(RidePattern::end))
            .collect()
    }
}

/// Values of every structured decision: path flows, matchings, fleet
/// movements and transit units.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Assignment {
    /// Travellers per catalog path.
    pub path_flow: Vec<f64>,
    /// Drivers per element of [`MatchingSpace::driver_stops`].
    pub driver_stops: Vec<f64>,
    /// Vehicles per element of [`MatchingSpace::ehail_legs`].
    pub ehail_vehicles: Vec<f64>,
    /// Vehicles per element of [`MatchingSpace::ride_patterns`].
    pub ride_vehicles: Vec<f64>,
    /// Vehicles per element of [`MatchingSpace::empty_trips`].
    pub empty_vehicles: Vec<f64>,
    /// Fleet vehicles neither carrying passengers nor repositioning.
    pub idle_vehicles: f64,
    /// Transit vehicles in service per link, for scenarios where lines add
    /// vehicles on demand.
    pub transit_units: BTreeMap<(BaseMode, usize), f64>,
}

impl Assignment {
    /// All-zero assignment shaped for `space`.
    pub fn zeros(catalog: &PathCatalog, space: &MatchingSpace) -> Self {
        Assignment {
            path_flow: vec![0.0; catalog.len()],
            driver_stops: vec![0.0; space.driver_stops.len()],
            ehail_vehicles: vec![0.0; space.ehail_legs.len()],
            ride_vehicles: vec![0.0; space.ride_patterns.len()],
            empty_vehicles: vec![0.0; space.empty_trips.len()],
            idle_vehicles: 0.0,
            transit_units: BTreeMap::new(),
        }
    }

    /// Rounds every value to the nearest integer.
    pub fn rounded(&self) -> Self {
        let r = |v: &Vec<f64>| v.iter().map(|x| x.round()).collect();
        Assignment {
            path_flow: r(&self.path_flow),
            driver_stops: r(&self.driver_stops),
            ehail_vehicles: r(&self.ehail_vehicles),
            ride_vehicles: r(&self.ride_vehicles),
            empty_vehicles: r(&self.empty_vehicles),
            idle_vehicles: self.idle_vehicles.round(),
            transit_units: self.transit_units.iter().map(|(k, v)| (*k, v.round())).collect(),
        }
    }
}
