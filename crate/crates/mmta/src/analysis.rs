//! Post-solution analytics: link flows, total system cost, price of
//! anarchy, modal shares and equilibrium verification.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::assignment::{Assignment, MatchingSpace};
use crate::costs::{
    bpr_integral, bpr_time, free_flow_times, generalized_path_cost, link_travel_time, static_path_cost, FlowState,
    GeneralizedPathCost, Principle,
};
use crate::mode::{BaseMode, Subnetwork};
use crate::network::{NodeId, Scenario};
use crate::paths::{Path, PathCatalog};

/// Transit vehicles running on every link, per mode: the scheduled
/// frequency, or the decided number of units when lines adapt to demand.
pub fn transit_units(s: &Scenario, a: &Assignment, mode: BaseMode) -> Vec<f64> {
    (0..s.links.len())
        .map(|l| {
            let scheduled = s.frequency_on(mode, l);
            if s.toggles.pt_adaptive && scheduled > 0.0 {
                a.transit_units.get(&(mode, l)).copied().unwrap_or(scheduled.ceil())
            } else {
                scheduled
            }
        })
        .collect()
}

/// Aggregate link flows of an assignment.
///
/// Road links count vehicles: cars, carpool drivers (their passengers ride
/// along), e-hailing and ridesharing vehicles, empty fleet trips, and buses
/// weighted by their car equivalent. Metro links count metro units; walking
/// and cycling links count their users.
pub fn aggregate_flows(s: &Scenario, catalog: &PathCatalog, space: &MatchingSpace, a: &Assignment) -> FlowState {
    let mut state = FlowState::empty(s);
    for (i, p) in catalog.paths.iter().enumerate() {
        let f = a.path_flow[i];
        if f == 0.0 {
            continue;
        }
        for leg in &p.legs {
            let per_mode = state
                .mode_link_flow
                .entry(leg.mode)
                .or_insert_with(|| vec![0.0; s.links.len()]);
            for &l in &leg.links {
                per_mode[l] += f;
            }
            if leg.mode.is_shared_service() {
                *state.mode_demand.entry(leg.mode).or_default() += f;
            }
        }
    }
    let bus = transit_units(s, a, BaseMode::Bus);
    let metro = transit_units(s, a, BaseMode::Metro);
    for (l, link) in s.links.iter().enumerate() {
        state.link_flow[l] = match link.subnetwork {
            Subnetwork::Road => {
                state.mode_link(BaseMode::Car, l)
                    + state.mode_link(BaseMode::CarpoolDriver, l)
                    + s.params.bus_pce * bus[l]
            }
            Subnetwork::Metro => metro[l],
            Subnetwork::Walk => state.mode_link(BaseMode::Walk, l),
            Subnetwork::Bike => state.mode_link(BaseMode::Bike, l),
        };
    }
    for (h, leg) in space.ehail_legs.iter().enumerate() {
        for &l in &leg.links {
            state.link_flow[l] += a.ehail_vehicles[h];
        }
    }
    for (k, pat) in space.ride_patterns.iter().enumerate() {
        for &l in &pat.vehicle_links {
            state.link_flow[l] += a.ride_vehicles[k];
        }
    }
    for (k, e) in space.empty_trips.iter().enumerate() {
        for &l in &e.links {
            state.link_flow[l] += a.empty_vehicles[k];
        }
    }
    state
}

/// Total cost of a state split by component.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SystemCost {
    /// Vehicle travel time on road links, `value_of_time * x * t(x)`.
    pub road_vehicles: f64,
    /// Running time of metro units.
    pub metro_units: f64,
    /// Flow-independent traveller costs: scheduled waiting, service time,
    /// money, travel on uncongested links and passengers' free-flow ride
    /// time on road links.
    pub travellers: f64,
    /// Waiting time of shared-service users.
    pub shared_waiting: f64,
    pub total: f64,
}

/// Total system cost of an assignment with exact volume-delay functions.
pub fn total_system_cost(s: &Scenario, catalog: &PathCatalog, a: &Assignment, flows: &FlowState) -> SystemCost {
    let alpha = s.params.value_of_time;
    let mut out = SystemCost::default();
    let metro = transit_units(s, a, BaseMode::Metro);
    for (l, link) in s.links.iter().enumerate() {
        match link.subnetwork {
            Subnetwork::Road => {
                out.road_vehicles += alpha * flows.link_flow[l] * link_travel_time(s, link, flows.link_flow[l]);
            }
            Subnetwork::Metro => {
                out.metro_units += alpha * metro[l] * link.length / s.params.speed(Subnetwork::Metro);
            }
            _ => {}
        }
    }
    let t0 = free_flow_times(s);
    for (i, p) in catalog.paths.iter().enumerate() {
        if a.path_flow[i] != 0.0 {
            out.travellers += a.path_flow[i] * static_path_cost(s, p, &t0);
        }
    }
    for (&m, &q) in &flows.mode_demand {
        out.shared_waiting += alpha * q * q / s.params.meeting_rate(m);
    }
    out.total = out.road_vehicles + out.metro_units + out.travellers + out.shared_waiting;
    out
}

/// Objective of the user-equilibrium program at an assignment: the
/// potential of road congestion (a sum of unit travel times above the
/// scheduled bus load when `integer`, an integral otherwise), flow-independent
/// costs with passengers riding at `passenger_time`, and shared-service
/// waiting.
pub fn equilibrium_potential(
    s: &Scenario,
    catalog: &PathCatalog,
    a: &Assignment,
    flows: &FlowState,
    integer: bool,
    passenger_time: &[f64],
) -> f64 {
    let alpha = s.params.value_of_time;
    let beta = s.params.bpr_beta;
    let pce = s.params.bus_pce;
    let bus = transit_units(s, a, BaseMode::Bus);
    let mut total = 0.0;
    for (l, link) in s.links.iter().enumerate() {
        if link.subnetwork != Subnetwork::Road {
            continue;
        }
        let (t0, delay, cap) = (link.t0, s.link_delay(link), link.capacity);
        let x = flows.link_flow[l];
        let base = if s.toggles.pt_adaptive {
            pce * s.frequency_on(BaseMode::Bus, l).ceil()
        } else {
            pce * bus[l]
        };
        let lattice = integer && base.fract() == 0.0 && pce.fract() == 0.0;
        total += alpha
            * if lattice {
                let n = (x - base).round() as i64;
                (1..=n).map(|k| bpr_time(t0, delay, cap, beta, base + k as f64)).sum::<f64>()
            } else {
                bpr_integral(t0, delay, cap, beta, x)
            };
    }
    for (i, p) in catalog.paths.iter().enumerate() {
        if a.path_flow[i] != 0.0 {
            total += a.path_flow[i] * static_path_cost(s, p, passenger_time);
        }
    }
    for (&m, &q) in &flows.mode_demand {
        total += alpha * q * q / s.params.meeting_rate(m);
    }
    total
}

/// `C_ue / C_so`, undefined when the system optimum costs nothing.
pub fn price_of_anarchy(cost_ue: f64, cost_so: f64) -> Option<f64> {
    (cost_so > 0.0).then(|| cost_ue / cost_so)
}

/// Worst-case inefficiency of selfish routing with polynomial link costs of
/// degree `beta`: `(b+1)^(1+1/b) / ((b+1)^(1+1/b) - b)`.
pub fn selfish_routing_bound(beta: f64) -> f64 {
    let k = (beta + 1.0).powf(1.0 + 1.0 / beta);
    k / (k - beta)
}

/// Coarse upper bound on the price of anarchy for a network with
/// `links` links, `modes` modes and total demand `demand`.
pub fn poa_upper_bound(beta: f64, links: usize, modes: usize, demand: f64) -> f64 {
    let a = links as f64;
    selfish_routing_bound(beta) + a * demand * demand + a * modes as f64 * demand
}

/// Share of travellers per mode label (intermodal chains are their own
/// categories). Empty when there is no demand.
pub fn modal_share(catalog: &PathCatalog, a: &Assignment) -> BTreeMap<String, f64> {
    let total: f64 = a.path_flow.iter().sum();
    let mut out = BTreeMap::new();
    if total <= 0.0 {
        return out;
    }
    for (i, p) in catalog.paths.iter().enumerate() {
        *out.entry(p.mode.label()).or_insert(0.0) += a.path_flow[i];
    }
    for v in out.values_mut() {
        *v /= total;
    }
    out
}

/// A used option with its generalized cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UsedOption {
    pub path: usize,
    pub origin: NodeId,
    pub destination: NodeId,
    pub mode: String,
    pub nodes: String,
    pub flow: f64,
    pub cost: GeneralizedPathCost,
}

pub fn used_options(
    s: &Scenario,
    catalog: &PathCatalog,
    a: &Assignment,
    flows: &FlowState,
    principle: Principle,
) -> Vec<UsedOption> {
    catalog
        .paths
        .iter()
        .enumerate()
        .filter(|(i, _)| a.path_flow[*i] > 1e-9)
        .map(|(i, p)| UsedOption {
            path: i,
            origin: p.origin,
            destination: p.destination,
            mode: p.mode.label(),
            nodes: p.node_label(s),
            flow: a.path_flow[i],
            cost: generalized_path_cost(s, p, flows, principle),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No admissible unilateral deviation lowers this traveller's cost.
    Equilibrium,
    /// Some admissible deviation lowers the cost by more than the tolerance.
    ProfitableDeviation,
    /// The option depends on a partner; deviations are reported for
    /// information only.
    Matched,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub origin: NodeId,
    pub destination: NodeId,
    pub path: usize,
    pub option: String,
    pub flow: f64,
    pub cost: f64,
    /// Smallest current cost over the OD pair's options.
    pub min_cost: f64,
    /// Largest cost reduction a single traveller obtains by switching
    /// (negative when every switch costs more). `None` when no switch is
    /// admissible.
    pub deviation_best_gain: Option<f64>,
    /// Option giving the largest reduction.
    pub best_alternative: Option<String>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub rows: Vec<EquilibriumRow>,
    pub tolerance: f64,
}

impl EquilibriumReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::ProfitableDeviation)
    }
}

fn is_matched(p: &Path) -> bool {
    p.legs.iter().any(|l| l.mode.is_matched())
}

fn option_label(s: &Scenario, p: &Path) -> String {
    format!("{} {}", p.mode.label(), p.node_label(s))
}

struct Deviation<'a> {
    s: &'a Scenario,
    catalog: &'a PathCatalog,
    space: &'a MatchingSpace,
    a: &'a Assignment,
    principle: Principle,
}

impl Deviation<'_> {
    /// Cost of `to` for a traveller who leaves `from` for it, or `None` when
    /// the move is not admissible (a full scheduled line or a full car park).
    fn cost_after_move(&self, from: usize, to: usize, amount: f64) -> Option<f64> {
        let s = self.s;
        let mut b = self.a.clone();
        b.path_flow[from] -= amount;
        b.path_flow[to] += amount;
        let target = &self.catalog.paths[to];
        let mut load: BTreeMap<(BaseMode, usize), f64> = BTreeMap::new();
        for (i, p) in self.catalog.paths.iter().enumerate() {
            for leg in p.legs.iter().filter(|l| l.mode.is_transit()) {
                for &l in &leg.links {
                    *load.entry((leg.mode, l)).or_default() += b.path_flow[i];
                }
            }
        }
        for leg in target.legs.iter().filter(|l| l.mode.is_transit()) {
            let cap = s.line_capacity(leg.mode);
            let veh = s.vehicle_capacity(leg.mode);
            for &l in &leg.links {
                let x = load[&(leg.mode, l)];
                if s.toggles.pt_adaptive {
                    let current = transit_units(s, self.a, leg.mode)[l];
                    let needed = (x / veh[l] - 1e-9).ceil();
                    b.transit_units.insert((leg.mode, l), current.max(needed));
                } else if x > cap[l] + 1e-9 {
                    return None;
                }
            }
        }
        if target.legs.len() > 1 && target.legs[0].mode.needs_parking() {
            let t = target.transfer_node(s)?;
            let used: f64 = self
                .catalog
                .paths
                .iter()
                .enumerate()
                .filter(|(_, p)| p.legs.len() > 1 && p.legs[0].mode.needs_parking() && p.transfer_node(s) == Some(t))
                .map(|(i, _)| b.path_flow[i])
                .sum();
            if used > s.parking_capacity.get(&t).copied().unwrap_or(0) as f64 + 1e-9 {
                return None;
            }
        }
        let flows = aggregate_flows(s, self.catalog, self.space, &b);
        Some(generalized_path_cost(s, target, &flows, self.principle).total)
    }
}

/// Checks that no traveller gains by switching option alone.
///
/// For integer assignments one traveller is moved from each used option to
/// every other option of the same OD pair that needs no partner, with link
/// flows, transit units and waiting times re-evaluated. For fractional
/// assignments the move is infinitesimal, which reduces to comparing
/// current costs. Options that depend on a partner get the
/// [`Verdict::Matched`] verdict.
pub fn verify_equilibrium(
    s: &Scenario,
    catalog: &PathCatalog,
    space: &MatchingSpace,
    a: &Assignment,
    principle: Principle,
    tol: f64,
) -> EquilibriumReport {
    let flows = aggregate_flows(s, catalog, space, a);
    let integral = a.path_flow.iter().all(|f| (f - f.round()).abs() < 1e-6);
    let costs: Vec<f64> = catalog
        .paths
        .iter()
        .map(|p| generalized_path_cost(s, p, &flows, principle).total)
        .collect();
    let dev = Deviation {
        s,
        catalog,
        space,
        a,
        principle,
    };
    let mut rows = Vec::new();
    for (i, p) in catalog.paths.iter().enumerate() {
        if a.path_flow[i] <= 1e-6 {
            continue;
        }
        let same_od: Vec<usize> = (0..catalog.len())
            .filter(|&k| catalog.paths[k].origin == p.origin && catalog.paths[k].destination == p.destination)
            .collect();
        let min_cost = same_od.iter().map(|&k| costs[k]).fold(f64::INFINITY, f64::min);
        let mut best: Option<(f64, usize)> = None;
        for &k in &same_od {
            if k == i || is_matched(&catalog.paths[k]) {
                continue;
            }
            let after = if integral {
                dev.cost_after_move(i, k, 1.0_f64.min(a.path_flow[i]))
            } else {
                dev.cost_after_move(i, k, 0.0)
            };
            if let Some(c) = after {
                let gain = costs[i] - c;
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, k));
                }
            }
        }
        let verdict = if is_matched(p) {
            Verdict::Matched
        } else if best.is_some_and(|(g, _)| g > tol) {
            Verdict::ProfitableDeviation
        } else {
            Verdict::Equilibrium
        };
        rows.push(EquilibriumRow {
            origin: p.origin,
            destination: p.destination,
            path: i,
            option: option_label(s, p),
            flow: a.path_flow[i],
            cost: costs[i],
            min_cost,
            deviation_best_gain: best.map(|b| b.0),
            best_alternative: best.map(|b| option_label(s, &catalog.paths[b.1])),
            verdict,
        });
    }
    EquilibriumReport { rows, tolerance: tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_constants() {
        assert!((selfish_routing_bound(1.0) - 4.0 / 3.0).abs() < 1e-12);
        assert!((selfish_routing_bound(4.0) - 2.1505).abs() < 1e-3);
        assert!((poa_upper_bound(1.0, 2, 1, 1.0) - 16.0 / 3.0).abs() < 1e-12);
        assert!((poa_upper_bound(1.0, 0, 5, 9.0) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn poa_undefined_without_cost() {
        assert_eq!(price_of_anarchy(1.0, 0.0), None);
        assert_eq!(price_of_anarchy(3.0, 3.0), Some(1.0));
    }
}
