//! Path enumeration, intermodal composition and sub-path relations.
//!
//! Paths are sequences of link indices into [`Scenario::links`], grouped into
//! legs. A door-to-door path has one leg; an intermodal path has one leg per
//! mode of its chain, consecutive legs meeting at transfer nodes.
//!
//! Candidate legs come from a k-shortest loop-free search (Yen's algorithm)
//! over the links a mode may use, weighted by free-flow generalized cost.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};

use rayon::prelude::*;

use crate::costs::{free_flow_leg_cost, Position};
use crate::mode::{BaseMode, Mode};
use crate::network::{NodeId, Scenario};

/// A maximal stretch of a path travelled with one base mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leg {
    pub mode: BaseMode,
    pub links: Vec<usize>,
}

/// A path between an origin and a destination for one mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    pub origin: NodeId,
    pub destination: NodeId,
    pub mode: Mode,
    pub legs: Vec<Leg>,
}

impl Path {
    /// All links in travel order.
    pub fn links(&self) -> Vec<usize> {
        self.legs.iter().flat_map(|l| l.links.iter().copied()).collect()
    }

    /// Node sequence, origin first.
    pub fn nodes(&self, s: &Scenario) -> Vec<NodeId> {
        let mut out = vec![self.origin];
        out.extend(self.links().into_iter().map(|a| s.links[a].head));
        out
    }

    /// Node sequence written as `1-4-3-2`.
    pub fn node_label(&self, s: &Scenario) -> String {
        self.nodes(s)
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Link ids separated by spaces.
    pub fn link_label(&self, s: &Scenario) -> String {
        self.links()
            .into_iter()
            .map(|a| s.links[a].id.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Nodes where consecutive legs meet.
    pub fn transfer_nodes(&self, s: &Scenario) -> Vec<NodeId> {
        self.legs[..self.legs.len() - 1]
            .iter()
            .map(|l| s.links[*l.links.last().expect("legs are non-empty")].head)
            .collect()
    }

    /// The first transfer node of an intermodal path.
    pub fn transfer_node(&self, s: &Scenario) -> Option<NodeId> {
        self.transfer_nodes(s).first().copied()
    }

    pub fn length(&self, s: &Scenario) -> f64 {
        self.links().into_iter().map(|a| s.links[a].length).sum()
    }

    /// Free-flow generalized cost used for ranking.
    pub fn free_flow_cost(&self, s: &Scenario) -> f64 {
        self.legs
            .iter()
            .map(|l| free_flow_leg_cost(s, l.mode, &l.links))
            .sum()
    }

    fn sort_key(&self, s: &Scenario) -> (f64, Vec<String>) {
        (
            self.free_flow_cost(s),
            self.links().into_iter().map(|a| s.links[a].id.clone()).collect(),
        )
    }
}

/// Errors raised by path operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("origin and destination coincide at node {0}")]
    DegenerateOd(NodeId),
    #[error("mode `{0}` is not enabled")]
    ModeDisabled(String),
    #[error("legs meet at node {0}, which is not a transfer node")]
    NotTransferNode(NodeId),
    #[error("first leg ends at node {end} but second leg starts at node {start}")]
    Disconnected { end: NodeId, start: NodeId },
    #[error("mode `{mode}` cannot travel on link `{link}`")]
    IllegalLegMode { mode: String, link: String },
    #[error("mode chain `{0}` is not allowed")]
    IllegalChain(String),
}

/// Enumeration limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_paths: usize,
    pub max_transfers: usize,
}

impl Limits {
    pub fn of(s: &Scenario) -> Self {
        Limits {
            max_paths: s.toggles.max_paths,
            max_transfers: s.toggles.max_transfers,
        }
    }
}

/// Whether `mode` may travel on link `a`: the subnetwork must match and
/// scheduled modes need a line serving the link.
pub fn link_usable(s: &Scenario, mode: BaseMode, a: usize) -> bool {
    let link = &s.links[a];
    link.subnetwork == mode.subnetwork() && (!mode.is_transit() || s.frequency_on(mode, a) > 0.0)
}

#[derive(PartialEq)]
struct HeapItem {
    cost: f64,
    node: NodeId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct LegGraph<'a> {
    s: &'a Scenario,
    /// Usable links sorted by id for deterministic relaxation order.
    links: Vec<usize>,
    weight: Vec<f64>,
}

impl<'a> LegGraph<'a> {
    fn new(s: &'a Scenario, mode: BaseMode) -> Self {
        let alpha = s.params.value_of_time;
        let mut links: Vec<usize> = (0..s.links.len()).filter(|&a| link_usable(s, mode, a)).collect();
        links.sort_by(|&a, &b| s.links[a].id.cmp(&s.links[b].id));
        let weight = (0..s.links.len())
            .map(|a| {
                crate::costs::link_cost(s, mode, a, Position::MIDDLE, 0.0, 0.0)
                    .total(alpha)
                    .max(0.0)
            })
            .collect();
        LegGraph { s, links, weight }
    }

    fn cost(&self, path: &[usize]) -> f64 {
        path.iter().map(|&a| self.weight[a]).sum()
    }

    fn shortest(
        &self,
        from: NodeId,
        to: NodeId,
        banned_links: &HashSet<usize>,
        banned_nodes: &HashSet<NodeId>,
    ) -> Option<Vec<usize>> {
        let mut dist: BTreeMap<NodeId, f64> = BTreeMap::from([(from, 0.0)]);
        let mut pred: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut done: HashSet<NodeId> = HashSet::new();
        let mut heap = BinaryHeap::from([HeapItem { cost: 0.0, node: from }]);
        while let Some(HeapItem { cost, node }) = heap.pop() {
            if !done.insert(node) {
                continue;
            }
            if node == to {
                break;
            }
            for &a in &self.links {
                let l = &self.s.links[a];
                if l.tail != node || banned_links.contains(&a) || banned_nodes.contains(&l.head) {
                    continue;
                }
                let nd = cost + self.weight[a];
                if dist.get(&l.head).is_none_or(|&d| nd < d) {
                    dist.insert(l.head, nd);
                    pred.insert(l.head, a);
                    heap.push(HeapItem { cost: nd, node: l.head });
                }
            }
        }
        if !done.contains(&to) {
            return None;
        }
        let mut path = Vec::new();
        let mut n = to;
        while n != from {
            let a = pred[&n];
            path.push(a);
            n = self.s.links[a].tail;
        }
        path.reverse();
        Some(path)
    }

    /// Yen's k-shortest loop-free paths, in non-decreasing weight order.
    fn k_shortest(&self, from: NodeId, to: NodeId, k: usize) -> Vec<Vec<usize>> {
        let mut found: Vec<Vec<usize>> = Vec::new();
        let Some(first) = self.shortest(from, to, &HashSet::new(), &HashSet::new()) else {
            return found;
        };
        found.push(first);
        let mut pool: BTreeSet<(OrdF64, Vec<String>, Vec<usize>)> = BTreeSet::new();
        let mut seen: HashSet<Vec<usize>> = found.iter().cloned().collect();
        while found.len() < k {
            let last = found.last().expect("non-empty").clone();
            for i in 0..last.len() {
                let root = &last[..i];
                let spur = if i == 0 { from } else { self.s.links[last[i - 1]].head };
                let banned_links: HashSet<usize> = found
                    .iter()
                    .filter(|p| p.len() > i && &p[..i] == root)
                    .map(|p| p[i])
                    .collect();
                let mut banned_nodes: HashSet<NodeId> = HashSet::from([from]);
                banned_nodes.extend(root.iter().map(|&a| self.s.links[a].head));
                banned_nodes.remove(&spur);
                if spur != from {
                    banned_nodes.insert(from);
                }
                let Some(tail) = self.shortest(spur, to, &banned_links, &banned_nodes) else {
                    continue;
                };
                let mut candidate = root.to_vec();
                candidate.extend(tail);
                if seen.insert(candidate.clone()) {
                    let ids = candidate.iter().map(|&a| self.s.links[a].id.clone()).collect();
                    pool.insert((OrdF64(self.cost(&candidate)), ids, candidate));
                }
            }
            match pool.pop_first() {
                Some((_, _, p)) => found.push(p),
                None => break,
            }
        }
        found
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn carpool_leg_allowed(s: &Scenario, mode: BaseMode, links: &[usize]) -> bool {
    match (mode, s.toggles.carpool_min_distance) {
        (BaseMode::CarpoolDriver | BaseMode::CarpoolPassenger, Some(threshold)) => {
            links.iter().map(|&a| s.links[a].length).sum::<f64>() > threshold
        }
        _ => true,
    }
}

/// Up to `k` loop-free single-mode legs from `from` to `to`, ordered by
/// free-flow generalized cost then by link ids. Carpool legs not longer than
/// the scenario's carpool threshold are skipped.
pub fn leg_paths(s: &Scenario, from: NodeId, to: NodeId, mode: BaseMode, k: usize) -> Vec<Vec<usize>> {
    if from == to || k == 0 {
        return Vec::new();
    }
    let graph = LegGraph::new(s, mode);
    let mut pool_size = 2 * k + 2;
    loop {
        let raw = graph.k_shortest(from, to, pool_size);
        let exhausted = raw.len() < pool_size;
        let mut legs: Vec<Vec<usize>> = raw
            .into_iter()
            .filter(|p| carpool_leg_allowed(s, mode, p))
            .collect();
        if legs.len() >= k || exhausted || pool_size > 64 * k + 64 {
            legs.sort_by(|a, b| {
                free_flow_leg_cost(s, mode, a)
                    .total_cmp(&free_flow_leg_cost(s, mode, b))
                    .then_with(|| link_ids(s, a).cmp(&link_ids(s, b)))
            });
            legs.truncate(k);
            return legs;
        }
        pool_size *= 4;
    }
}

fn link_ids(s: &Scenario, links: &[usize]) -> Vec<String> {
    links.iter().map(|&a| s.links[a].id.clone()).collect()
}

fn is_simple(s: &Scenario, origin: NodeId, links: &[usize]) -> bool {
    let mut seen = HashSet::from([origin]);
    links.iter().all(|&a| seen.insert(s.links[a].head))
}

/// Enumerates up to `limits.max_paths` loop-free paths for one OD pair and
/// mode, ordered by free-flow generalized cost with ties broken by the link
/// id sequence.
pub fn enumerate_paths(
    s: &Scenario,
    od: (NodeId, NodeId),
    mode: &Mode,
    limits: Limits,
) -> Result<Vec<Path>, PathError> {
    let (o, d) = od;
    if o == d {
        return Err(PathError::DegenerateOd(o));
    }
    if !s.toggles.modes.contains(mode) {
        return Err(PathError::ModeDisabled(mode.label()));
    }
    if mode.transfers() > limits.max_transfers {
        return Ok(Vec::new());
    }
    let legs = mode.legs();
    if legs.len() == 1 {
        return Ok(leg_paths(s, o, d, legs[0], limits.max_paths)
            .into_iter()
            .map(|links| Path {
                origin: o,
                destination: d,
                mode: mode.clone(),
                legs: vec![Leg { mode: legs[0], links }],
            })
            .collect());
    }

    let transfers: Vec<NodeId> = s
        .transfer_nodes
        .iter()
        .copied()
        .filter(|&t| t != o && t != d)
        .collect();
    let mut cache: BTreeMap<(NodeId, NodeId, BaseMode), Vec<Vec<usize>>> = BTreeMap::new();
    let mut out: Vec<Path> = Vec::new();
    for junctions in junction_sequences(&transfers, legs.len() - 1) {
        let mut stops = vec![o];
        stops.extend(&junctions);
        stops.push(d);
        let mut options: Vec<Vec<Vec<usize>>> = Vec::new();
        for (i, &m) in legs.iter().enumerate() {
            let key = (stops[i], stops[i + 1], m);
            let paths = cache
                .entry(key)
                .or_insert_with(|| leg_paths(s, key.0, key.1, m, limits.max_paths))
                .clone();
            options.push(paths);
        }
        for combo in cartesian(&options) {
            let all: Vec<usize> = combo.iter().flat_map(|l| l.iter().copied()).collect();
            if !is_simple(s, o, &all) {
                continue;
            }
            out.push(Path {
                origin: o,
                destination: d,
                mode: mode.clone(),
                legs: legs
                    .iter()
                    .zip(combo)
                    .map(|(&m, links)| Leg { mode: m, links })
                    .collect(),
            });
        }
    }
    out.sort_by(|a, b| {
        let (ca, ia) = a.sort_key(s);
        let (cb, ib) = b.sort_key(s);
        ca.total_cmp(&cb).then_with(|| ia.cmp(&ib))
    });
    out.dedup();
    out.truncate(limits.max_paths);
    Ok(out)
}

fn junction_sequences(nodes: &[NodeId], len: usize) -> Vec<Vec<NodeId>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in junction_sequences(nodes, len - 1) {
        for &n in nodes {
            if !rest.contains(&n) {
                let mut seq = rest.clone();
                seq.push(n);
                out.push(seq);
            }
        }
    }
    out
}

fn cartesian(options: &[Vec<Vec<usize>>]) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for opts in options {
        let mut next = Vec::new();
        for prefix in &out {
            for o in opts {
                let mut p = prefix.clone();
                p.push(o.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Concatenates two paths at a transfer node into an intermodal path.
pub fn compose_intermodal(s: &Scenario, p1: &Path, p2: &Path) -> Result<Path, PathError> {
    if p1.destination != p2.origin {
        return Err(PathError::Disconnected {
            end: p1.destination,
            start: p2.origin,
        });
    }
    if !s.transfer_nodes.contains(&p1.destination) {
        return Err(PathError::NotTransferNode(p1.destination));
    }
    let legs: Vec<Leg> = p1.legs.iter().chain(&p2.legs).cloned().collect();
    for leg in &legs {
        if let Some(&a) = leg.links.iter().find(|&&a| s.links[a].subnetwork != leg.mode.subnetwork()) {
            return Err(PathError::IllegalLegMode {
                mode: leg.mode.to_string(),
                link: s.links[a].id.clone(),
            });
        }
    }
    let chain: Vec<BaseMode> = legs.iter().map(|l| l.mode).collect();
    let mode = Mode::chain(&chain).map_err(|e| PathError::IllegalChain(e.label))?;
    Ok(Path {
        origin: p1.origin,
        destination: p2.destination,
        mode,
        legs,
    })
}

/// Whether `inner` occurs as a contiguous block of `outer`.
pub fn is_contiguous_subsequence(inner: &[usize], outer: &[usize]) -> bool {
    !inner.is_empty() && inner.len() <= outer.len() && outer.windows(inner.len()).any(|w| w == inner)
}

/// Enumerated paths of every offered mode for every OD pair with demand.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathCatalog {
    pub paths: Vec<Path>,
    index: BTreeMap<(NodeId, NodeId, Mode), Vec<usize>>,
}

impl PathCatalog {
    /// Builds the catalog for every active OD pair and offered mode.
    pub fn build(s: &Scenario) -> Self {
        let limits = Limits::of(s);
        let keys: Vec<(NodeId, NodeId, Mode)> = s
            .active_demand()
            .flat_map(|d| {
                s.offered_modes()
                    .into_iter()
                    .map(move |m| (d.origin, d.destination, m))
            })
            .collect();
        let found: Vec<Vec<Path>> = keys
            .par_iter()
            .map(|(o, d, m)| enumerate_paths(s, (*o, *d), m, limits).unwrap_or_default())
            .collect();
        let mut catalog = PathCatalog::default();
        for (key, paths) in keys.into_iter().zip(found) {
            let ids = catalog.index.entry(key).or_default();
            for p in paths {
                ids.push(catalog.paths.len());
                catalog.paths.push(p);
            }
        }
        catalog
    }

    /// Builds a catalog from explicit paths, keyed by their OD pair and mode.
    pub fn from_paths(paths: Vec<Path>) -> Self {
        let mut catalog = PathCatalog::default();
        for p in paths {
            catalog
                .index
                .entry((p.origin, p.destination, p.mode.clone()))
                .or_default()
                .push(catalog.paths.len());
            catalog.paths.push(p);
        }
        catalog
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Catalog indices of the paths for one OD pair and mode.
    pub fn ids(&self, o: NodeId, d: NodeId, mode: &Mode) -> &[usize] {
        self.index
            .get(&(o, d, mode.clone()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All (OD, mode) keys in deterministic order.
    pub fn keys(&self) -> impl Iterator<Item = &(NodeId, NodeId, Mode)> {
        self.index.keys()
    }

    /// Catalog paths between `r` and `s` of mode `m` that contain `p` as a
    /// contiguous block of links.
    pub fn superpaths_containing(&self, p: &Path, r: NodeId, s: NodeId, m: &Mode) -> Vec<usize> {
        let inner = p.links();
        self.ids(r, s, m)
            .iter()
            .copied()
            .filter(|&l| is_contiguous_subsequence(&inner, &self.paths[l].links()))
            .collect()
    }

    /// Catalog paths between `r` and `s` of mode `m` whose links form a
    /// contiguous block of `p`.
    pub fn subpaths_of(&self, p: &Path, r: NodeId, s: NodeId, m: &Mode) -> Vec<usize> {
        let outer = p.links();
        self.ids(r, s, m)
            .iter()
            .copied()
            .filter(|&l| is_contiguous_subsequence(&self.paths[l].links(), &outer))
            .collect()
    }
}

/// One link occurrence on a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incidence {
    pub link: usize,
    pub leg: usize,
    pub mode: BaseMode,
    pub position: Position,
}

/// Link-path incidence of a catalog, with per-leg positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IncidenceTable {
    pub rows: Vec<Vec<Incidence>>,
}

impl IncidenceTable {
    /// Whether link `a` lies on catalog path `p`.
    pub fn delta(&self, p: usize, a: usize) -> bool {
        self.rows[p].iter().any(|e| e.link == a)
    }

    /// First link of each leg of path `p`.
    pub fn origin_links(&self, p: usize) -> Vec<usize> {
        self.rows[p].iter().filter(|e| e.position.origin).map(|e| e.link).collect()
    }

    /// Last link of each leg of path `p`.
    pub fn destination_links(&self, p: usize) -> Vec<usize> {
        self.rows[p]
            .iter()
            .filter(|e| e.position.destination)
            .map(|e| e.link)
            .collect()
    }
}

pub fn build_incidence(catalog: &PathCatalog) -> IncidenceTable {
    IncidenceTable {
        rows: catalog.paths.iter().map(path_incidence).collect(),
    }
}

/// Link occurrences of a single path.
pub fn path_incidence(p: &Path) -> Vec<Incidence> {
    p.legs
        .iter()
        .enumerate()
        .flat_map(|(leg, l)| {
            l.links.iter().enumerate().map(move |(k, &link)| Incidence {
                link,
                leg,
                mode: l.mode,
                position: Position::in_leg(k, l.links.len()),
            })
        })
        .collect()
}
