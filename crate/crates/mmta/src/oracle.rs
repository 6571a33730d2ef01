//! Exhaustive search over integer assignments of tiny scenarios.
//!
//! Every combination of path flows, carpool driver stops, ridesharing
//! vehicle patterns and empty fleet trips is generated, checked with
//! [`check_assignment`] and scored with the exact cost functions of
//! [`crate::analysis`]. The search shares no code with the program builder
//! or the solver, which makes it a reference for both.
//!
//! Two reductions keep the space finite:
//!
//! * each empty trip carries at most as many vehicles as there are occupied
//!   trips, and
//! * transit lines that adapt to demand run the fewest units that carry
//!   their load.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{aggregate_flows, equilibrium_potential, total_system_cost};
use crate::assignment::{Assignment, MatchingSpace};
use crate::check::check_assignment;
use crate::costs::{free_flow_times, Principle};
use crate::mode::BaseMode;
use crate::network::Scenario;
use crate::paths::PathCatalog;

/// Default limit on the number of candidate assignments.
pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("the enumeration space exceeds the cap of {cap} candidates")]
    CapExceeded { cap: u64 },
    #[error("no feasible integer assignment exists")]
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub objective: f64,
    /// Every assignment attaining the objective, in a canonical order.
    pub optima: Vec<Assignment>,
    /// Number of candidates generated.
    pub candidates: u64,
}

/// All ways of writing `total` as an ordered sum of `parts` non-negative
/// integers.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cartesian product of per-item choice lists.
fn product(lists: &[Vec<Vec<u64>>]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for choice in list {
                let mut v = prefix.clone();
                v.extend(choice);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

struct Context<'a> {
    s: &'a Scenario,
    catalog: &'a PathCatalog,
    space: &'a MatchingSpace,
    principle: Principle,
    passenger_time: Vec<f64>,
    cap: u64,
}

#[derive(Default)]
struct Partial {
    best: f64,
    optima: Vec<Assignment>,
    candidates: u64,
}

impl Partial {
    fn offer(&mut self, a: Assignment, value: f64) {
        let tol = 1e-9 * value.abs().max(1.0);
        if self.optima.is_empty() || value < self.best - tol {
            self.best = value;
            self.optima = vec![a];
        } else if (value - self.best).abs() <= tol {
            self.optima.push(a);
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.candidates += other.candidates;
        if other.optima.is_empty() {
            return self;
        }
        if self.optima.is_empty() {
            return Partial {
                candidates: self.candidates,
                ..other
            };
        }
        let tol = 1e-9 * self.best.abs().max(1.0);
        if other.best < self.best - tol {
            self.best = other.best;
            self.optima = other.optima;
        } else if (other.best - self.best).abs() <= tol {
            self.optima.extend(other.optima);
        }
        self
    }
}

impl Context<'_> {
    fn objective(&self, a: &Assignment) -> f64 {
        let flows = aggregate_flows(self.s, self.catalog, self.space, a);
        match self.principle {
            Principle::So => total_system_cost(self.s, self.catalog, a, &flows).total,
            Principle::Ue => equilibrium_potential(self.s, self.catalog, a, &flows, true, &self.passenger_time),
        }
    }

    fn fewest_units(&self, a: &mut Assignment) {
        if !self.s.toggles.pt_adaptive {
            return;
        }
        for mode in [BaseMode::Bus, BaseMode::Metro] {
            let veh = self.s.vehicle_capacity(mode);
            for l in 0..self.s.links.len() {
                let freq = self.s.frequency_on(mode, l);
                if freq <= 0.0 {
                    continue;
                }
                let load: f64 = self
                    .catalog
                    .paths
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.legs.iter().any(|g| g.mode == mode && g.links.contains(&l)))
                    .map(|(i, _)| a.path_flow[i])
                    .sum();
                let units = freq.ceil().max((load / veh[l]).ceil());
                a.transit_units.insert((mode, l), units);
            }
        }
    }

    /// Explores every completion of the given path flows.
    fn explore(&self, flows: &[u64]) -> Result<Partial, OracleError> {
        let s = self.s;
        let space = self.space;
        let mut out = Partial::default();
        let mut base = Assignment::zeros(self.catalog, space);
        base.path_flow = flows.iter().map(|&f| f as f64).collect();
        for (h, leg) in space.ehail_legs.iter().enumerate() {
            base.ehail_vehicles[h] = leg.users.iter().map(|&i| base.path_flow[i]).sum();
        }
        self.fewest_units(&mut base);

        // Driver stops: each driver's flow is split among its stops.
        let mut stops_by_driver: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, st) in space.driver_stops.iter().enumerate() {
            stops_by_driver.entry(st.driver).or_default().push(k);
        }
        let mut driver_lists = Vec::new();
        let mut driver_slots = Vec::new();
        for (&d, ks) in &stops_by_driver {
            driver_lists.push(compositions(flows[d], ks.len()));
            driver_slots.extend(ks.iter().copied());
        }
        let driver_choices = product(&driver_lists);

        // Rideshare patterns: each bounded by the passengers of its legs.
        let leg_flow = |h: usize| -> u64 { space.rideshare_legs[h].users.iter().map(|&i| flows[i]).sum() };
        let pattern_lists: Vec<Vec<Vec<u64>>> = space
            .ride_patterns
            .iter()
            .map(|p| (0..=leg_flow(p.first).min(leg_flow(p.second))).map(|z| vec![z]).collect())
            .collect();
        let ride_choices: Vec<Vec<u64>> = product(&pattern_lists)
            .into_iter()
            .filter(|z| {
                (0..space.rideshare_legs.len()).all(|h| {
                    let carried: u64 = space
                        .ride_patterns
                        .iter()
                        .zip(z)
                        .map(|(p, &v)| v * (p.multiplicity(h) as u64))
                        .sum();
                    carried == leg_flow(h)
                })
            })
            .collect();

        for g in &driver_choices {
            let mut a = base.clone();
            for (&k, &v) in driver_slots.iter().zip(g) {
                a.driver_stops[k] = v as f64;
            }
            for z in &ride_choices {
                let mut b = a.clone();
                b.ride_vehicles = z.iter().map(|&v| v as f64).collect();
                let occupied: u64 = z.iter().sum::<u64>() + b.ehail_vehicles.iter().sum::<f64>() as u64;
                let empty_lists: Vec<Vec<Vec<u64>>> = space
                    .empty_trips
                    .iter()
                    .map(|_| (0..=occupied).map(|v| vec![v]).collect())
                    .collect();
                let empty_count = (occupied + 1).checked_pow(space.empty_trips.len() as u32).unwrap_or(u64::MAX);
                if out.candidates.saturating_add(empty_count) > self.cap {
                    return Err(OracleError::CapExceeded { cap: self.cap });
                }
                for e in product(&empty_lists) {
                    out.candidates += 1;
                    let mut c = b.clone();
                    c.empty_vehicles = e.iter().map(|&v| v as f64).collect();
                    if space.fleet {
                        let busy = occupied + e.iter().sum::<u64>();
                        if busy > s.fleet_size {
                            continue;
                        }
                        c.idle_vehicles = (s.fleet_size - busy) as f64;
                    }
                    if !check_assignment(s, self.catalog, space, &c, true, 1e-9).is_feasible() {
                        continue;
                    }
                    let value = self.objective(&c);
                    out.offer(c, value);
                }
            }
        }
        Ok(out)
    }
}

/// Finds every optimal integer assignment of `s` under `principle`.
///
/// `passenger_time` is the in-vehicle time charged to passengers on road
/// links in the user-equilibrium objective (free-flow times when `None`).
pub fn brute_force_solve(
    s: &Scenario,
    catalog: &PathCatalog,
    principle: Principle,
    passenger_time: Option<&[f64]>,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    let space = MatchingSpace::build(s, catalog);
    let mut od_lists = Vec::new();
    let mut od_slots = Vec::new();
    let mut estimate = 1.0f64;
    for d in &s.demand {
        let ids: Vec<usize> = (0..catalog.len())
            .filter(|&i| catalog.paths[i].origin == d.origin && catalog.paths[i].destination == d.destination)
            .collect();
        if ids.is_empty() {
            if d.travellers > 0 {
                return Err(OracleError::Infeasible);
            }
            continue;
        }
        estimate *= binomial(d.travellers + ids.len() as u64 - 1, ids.len().max(1) as u64 - 1);
        if estimate > cap as f64 {
            return Err(OracleError::CapExceeded { cap });
        }
        od_lists.push(compositions(d.travellers, ids.len()));
        od_slots.extend(ids);
    }
    let flow_vectors: Vec<Vec<u64>> = product(&od_lists)
        .into_iter()
        .map(|choice| {
            let mut f = vec![0u64; catalog.len()];
            for (&i, &v) in od_slots.iter().zip(&choice) {
                f[i] = v;
            }
            f
        })
        .collect();
    let ctx = Context {
        s,
        catalog,
        space: &space,
        principle,
        passenger_time: passenger_time.map_or_else(|| free_flow_times(s), <[f64]>::to_vec),
        cap,
    };
    let merged = flow_vectors
        .par_iter()
        .map(|f| ctx.explore(f))
        .try_reduce(Partial::default, |a, b| Ok(a.merge(b)))?;
    if merged.candidates > cap {
        return Err(OracleError::CapExceeded { cap });
    }
    if merged.optima.is_empty() {
        return Err(OracleError::Infeasible);
    }
    let mut optima = merged.optima;
    optima.sort_by(|a, b| {
        let key = |x: &Assignment| {
            x.path_flow
                .iter()
                .chain(&x.driver_stops)
                .chain(&x.ride_vehicles)
                .chain(&x.empty_vehicles)
                .copied()
                .collect::<Vec<f64>>()
        };
        key(a).partial_cmp(&key(b)).expect("finite values")
    });
    Ok(OracleResult {
        objective: merged.best,
        optima,
        candidates: merged.candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(3, 2).len(), 4);
        assert_eq!(compositions(0, 3), vec![vec![0, 0, 0]]);
        assert_eq!(compositions(2, 3).len(), 6);
        assert_eq!(binomial(4, 2), 6.0);
    }
}
