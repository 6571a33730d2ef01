//! Link-level cost components and generalized path costs.
//!
//! Every traversed link contributes travel time, waiting time, service time
//! and a monetary cost. Time is converted to money with the value of time,
//! so the generalized cost of a leg reads
//! `sum over links of value_of_time * (travel + waiting + service) + money`.
//!
//! Waiting, boarding and alighting terms depend on where the link sits in a
//! leg: waiting and boarding attach to the first link of a leg, alighting and
//! parking to the last one.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::mode::{BaseMode, Subnetwork};
use crate::network::{Link, Scenario};
use crate::paths::Path;

/// Which principle the costs are evaluated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Principle {
    /// User equilibrium: every traveller minimizes their own cost.
    Ue,
    /// System optimum: total cost is minimized.
    So,
}

impl Principle {
    pub fn code(self) -> &'static str {
        match self {
            Principle::Ue => "ue",
            Principle::So => "so",
        }
    }
}

impl std::str::FromStr for Principle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ue" => Ok(Principle::Ue),
            "so" => Ok(Principle::So),
            other => Err(format!("unknown principle `{other}` (expected ue or so)")),
        }
    }
}

impl std::fmt::Display for Principle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Where a link sits within a leg.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Position {
    /// First link of the leg: waiting and boarding happen here.
    pub origin: bool,
    /// Last link of the leg: alighting and parking happen here.
    pub destination: bool,
}

impl Position {
    pub const MIDDLE: Position = Position {
        origin: false,
        destination: false,
    };

    /// Position of link `k` in a leg of `len` links.
    pub fn in_leg(k: usize, len: usize) -> Position {
        Position {
            origin: k == 0,
            destination: k + 1 == len,
        }
    }

    fn o(self) -> f64 {
        if self.origin {
            1.0
        } else {
            0.0
        }
    }

    fn d(self) -> f64 {
        if self.destination {
            1.0
        } else {
            0.0
        }
    }
}

/// The four cost components of one link for one mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LinkCostBreakdown {
    pub travel_time: f64,
    pub waiting: f64,
    pub service: f64,
    pub money: f64,
}

impl LinkCostBreakdown {
    /// Generalized cost of the link.
    pub fn total(&self, value_of_time: f64) -> f64 {
        value_of_time * (self.travel_time + self.waiting + self.service) + self.money
    }
}

/// Volume-delay function `t0 + delay * (x / capacity)^beta`.
pub fn bpr_time(t0: f64, delay: f64, capacity: f64, beta: f64, x: f64) -> f64 {
    let x = x.max(0.0);
    if delay == 0.0 || x == 0.0 {
        return t0;
    }
    t0 + delay * (x / capacity).powf(beta)
}

/// Integral of [`bpr_time`] from 0 to `x`.
pub fn bpr_integral(t0: f64, delay: f64, capacity: f64, beta: f64, x: f64) -> f64 {
    let x = x.max(0.0);
    t0 * x + delay * x * (x / capacity).powf(beta) / (beta + 1.0)
}

/// Travel time of `link` when it carries a total flow `x`.
pub fn link_travel_time(s: &Scenario, link: &Link, x: f64) -> f64 {
    match link.subnetwork {
        Subnetwork::Road => bpr_time(
            link.t0,
            s.link_delay(link),
            link.capacity,
            s.params.bpr_beta,
            x,
        ),
        n => link.length / s.params.speed(n),
    }
}

/// Waiting time of `mode` on link `link_idx`. Scheduled modes wait half a
/// headway; shared services wait `mode_demand / meeting_rate`.
pub fn waiting_time(
    s: &Scenario,
    mode: BaseMode,
    link_idx: usize,
    position: Position,
    mode_demand: f64,
) -> f64 {
    if !position.origin {
        return 0.0;
    }
    match mode {
        BaseMode::Bus | BaseMode::Metro => {
            let freq = s.frequency_on(mode, link_idx);
            if freq > 0.0 {
                1.0 / (2.0 * freq)
            } else {
                f64::INFINITY
            }
        }
        m if m.is_shared_service() => mode_demand / s.params.meeting_rate(m),
        _ => 0.0,
    }
}

/// Boarding, alighting and parking time of `mode` on a link.
pub fn service_time(s: &Scenario, mode: BaseMode, position: Position) -> f64 {
    let p = &s.params;
    match mode {
        BaseMode::Walk => 0.0,
        BaseMode::Bus | BaseMode::Metro => p.service_time(mode),
        BaseMode::CarpoolPassenger | BaseMode::RideShare | BaseMode::EHail => {
            p.service_time(mode) * (position.o() + position.d())
        }
        BaseMode::CarpoolDriver => {
            p.service_time(mode) * (position.o() + position.d())
                + p.parking_time(mode) * position.d()
        }
        BaseMode::Car | BaseMode::Bike => p.parking_time(mode) * position.d(),
    }
}

/// Monetary cost of `mode` on a link. Carpool drivers share the driving
/// cost with the fare they receive, so their cost may be negative.
pub fn monetary_cost(s: &Scenario, mode: BaseMode, link: &Link, position: Position) -> f64 {
    let p = &s.params;
    match mode {
        BaseMode::Car => p.distance_cost * link.length + p.parking_fee(mode) * position.d(),
        BaseMode::Bus
        | BaseMode::Metro
        | BaseMode::CarpoolPassenger
        | BaseMode::RideShare
        | BaseMode::EHail => p.fare(mode),
        BaseMode::CarpoolDriver => {
            p.distance_cost * link.length + p.parking_fee(mode) * position.d() - p.fare(mode)
        }
        BaseMode::Walk | BaseMode::Bike => 0.0,
    }
}

/// All four components for one link of a leg.
pub fn link_cost(
    s: &Scenario,
    mode: BaseMode,
    link_idx: usize,
    position: Position,
    link_flow: f64,
    mode_demand: f64,
) -> LinkCostBreakdown {
    let link = &s.links[link_idx];
    LinkCostBreakdown {
        travel_time: link_travel_time(s, link, link_flow),
        waiting: waiting_time(s, mode, link_idx, position, mode_demand),
        service: service_time(s, mode, position),
        money: monetary_cost(s, mode, link, position),
    }
}

/// Generalized cost of a leg at free flow with no shared-service demand.
/// Used to rank candidate paths.
pub fn free_flow_leg_cost(s: &Scenario, mode: BaseMode, links: &[usize]) -> f64 {
    let alpha = s.params.value_of_time;
    links
        .iter()
        .enumerate()
        .map(|(k, &a)| link_cost(s, mode, a, Position::in_leg(k, links.len()), 0.0, 0.0).total(alpha))
        .sum()
}

/// Flow-independent cost of one traveller on `path`: scheduled waiting,
/// service time, money, travel time on uncongested links, and the in-vehicle
/// time of passengers riding on road links, taken from `passenger_time`
/// (indexed by link). Drivers' own road travel time and the waiting time of
/// shared services depend on the flows and are excluded.
pub fn static_path_cost(s: &Scenario, path: &Path, passenger_time: &[f64]) -> f64 {
    let alpha = s.params.value_of_time;
    let mut total = 0.0;
    for leg in &path.legs {
        let n = leg.links.len();
        for (k, &a) in leg.links.iter().enumerate() {
            let pos = Position::in_leg(k, n);
            let link = &s.links[a];
            let scheduled_wait = if leg.mode.is_transit() {
                waiting_time(s, leg.mode, a, pos, 0.0)
            } else {
                0.0
            };
            let travel = match link.subnetwork {
                Subnetwork::Road if leg.mode.counts_as_traffic() => 0.0,
                Subnetwork::Road => passenger_time[a],
                n => link.length / s.params.speed(n),
            };
            total += alpha * (travel + scheduled_wait + service_time(s, leg.mode, pos))
                + monetary_cost(s, leg.mode, link, pos);
        }
    }
    total
}

/// Free-flow travel time of every link.
pub fn free_flow_times(s: &Scenario) -> Vec<f64> {
    s.links.iter().map(|l| link_travel_time(s, l, 0.0)).collect()
}

/// Aggregate traffic state the generalized costs are evaluated against.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowState {
    /// Total flow `x_a` per link, in vehicle units on road links.
    pub link_flow: Vec<f64>,
    /// Traveller flow per link and base mode.
    pub mode_link_flow: BTreeMap<BaseMode, Vec<f64>>,
    /// Number of travellers using each shared service on some leg.
    pub mode_demand: BTreeMap<BaseMode, f64>,
}

impl FlowState {
    /// Free-flow state of a scenario.
    pub fn empty(s: &Scenario) -> Self {
        FlowState {
            link_flow: vec![0.0; s.links.len()],
            mode_link_flow: BTreeMap::new(),
            mode_demand: BTreeMap::new(),
        }
    }

    pub fn mode_link(&self, m: BaseMode, a: usize) -> f64 {
        self.mode_link_flow.get(&m).map_or(0.0, |v| v[a])
    }

    pub fn demand_of(&self, m: BaseMode) -> f64 {
        self.mode_demand.get(&m).copied().unwrap_or(0.0)
    }
}

/// Generalized cost of a path with its decomposition.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GeneralizedPathCost {
    pub total: f64,
    pub travel_time: f64,
    pub waiting: f64,
    pub service: f64,
    pub money: f64,
    /// Marginal delay a shared-service user imposes on the other users of
    /// the same service (user equilibrium only).
    pub delay_term: f64,
}

/// Generalized cost of `path` under `state`. Under user equilibrium, legs
/// on shared services also carry the marginal waiting delay
/// `value_of_time * q / meeting_rate`, `q` being the service's demand.
pub fn generalized_path_cost(
    s: &Scenario,
    path: &Path,
    state: &FlowState,
    principle: Principle,
) -> GeneralizedPathCost {
    let alpha = s.params.value_of_time;
    let mut out = GeneralizedPathCost::default();
    for leg in &path.legs {
        let n = leg.links.len();
        for (k, &a) in leg.links.iter().enumerate() {
            let pos = Position::in_leg(k, n);
            let c = link_cost(s, leg.mode, a, pos, state.link_flow[a], state.demand_of(leg.mode));
            out.travel_time += c.travel_time;
            out.waiting += c.waiting;
            out.service += c.service;
            out.money += c.money;
            if principle == Principle::Ue && pos.origin && leg.mode.is_shared_service() {
                out.delay_term += alpha * state.demand_of(leg.mode) / s.params.meeting_rate(leg.mode);
            }
        }
    }
    out.total = alpha * (out.travel_time + out.waiting + out.service) + out.money + out.delay_term;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpr_integral_matches_numeric_quadrature() {
        let (t0, d, c, b) = (2.0, 0.3, 50.0, 4.0);
        let x = 80.0;
        let n = 100_000;
        let h = x / n as f64;
        let mid: f64 = (0..n).map(|i| bpr_time(t0, d, c, b, (i as f64 + 0.5) * h) * h).sum();
        assert!((mid - bpr_integral(t0, d, c, b, x)).abs() < 1e-6);
    }

    #[test]
    fn position_flags() {
        assert_eq!(
            Position::in_leg(0, 1),
            Position {
                origin: true,
                destination: true
            }
        );
        assert_eq!(Position::in_leg(1, 3), Position::MIDDLE);
    }
}
