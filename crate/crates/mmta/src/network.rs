//! Scenario documents: the multimodal network, the demand, service
//! parameters and scenario toggles.
//!
//! A scenario is a single JSON document with the top-level keys `nodes`,
//! `links`, `pt_lines`, `demand`, `params`, `fleet_size`,
//! `parking_capacity` and `toggles`. Absent optional fields take the
//! defaults listed on [`ModeParams::default`] and [`Toggles::default`].
//!
//! ```
//! let doc = r#"{
//!   "nodes": [1, 2],
//!   "links": [
//!     {"id": "1-2", "tail": 1, "head": 2, "length": 3, "subnetwork": "WN"}
//!   ],
//!   "demand": [{"o": 1, "d": 2, "q": 4}],
//!   "toggles": {"modes": ["W"]}
//! }"#;
//! let scenario = mmta::network::load_scenario(doc).unwrap();
//! assert_eq!(scenario.total_demand(), 4);
//! assert!(mmta::network::validate_scenario(&scenario).is_valid());
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::mode::{BaseMode, Mode, Subnetwork};

pub type NodeId = u32;

/// A directed link of one subnetwork.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: String,
    pub tail: NodeId,
    pub head: NodeId,
    /// Length in distance units.
    pub length: f64,
    pub subnetwork: Subnetwork,
    /// Free-flow travel time (road links only).
    pub t0: f64,
    /// Capacity in vehicles per time unit (road links only).
    pub capacity: f64,
    /// Congestion coefficient of the volume-delay function. When absent the
    /// classic form `t0 * eta` is used, so the travel time reads
    /// `t0 + delay * (x / capacity)^beta`.
    pub delay: Option<f64>,
}

/// A scheduled bus or metro line.
#[derive(Clone, Debug, PartialEq)]
pub struct PtLine {
    pub id: String,
    pub mode: BaseMode,
    /// Link ids in travel order.
    pub links: Vec<String>,
    /// Vehicles per time unit on each link of the line.
    pub frequency: Vec<f64>,
    /// Passenger capacity of one vehicle.
    pub veh_capacity: f64,
}

/// One origin-destination demand entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Demand {
    pub origin: NodeId,
    pub destination: NodeId,
    pub travellers: u64,
}

/// Per-mode service and cost parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeParams {
    /// Meeting rate of the shared services (pickups per time unit).
    pub meeting_rate: BTreeMap<BaseMode, f64>,
    /// Boarding and drop-off time.
    pub service_time: BTreeMap<BaseMode, f64>,
    /// Time needed to park at the end of a leg.
    pub parking_time: BTreeMap<BaseMode, f64>,
    /// Fare charged per traversed link.
    pub fare: BTreeMap<BaseMode, f64>,
    /// Parking fee paid at the end of a leg.
    pub parking_fee: BTreeMap<BaseMode, f64>,
    /// Passenger seats offered per vehicle.
    pub seats: BTreeMap<BaseMode, u32>,
    /// Travel speed on the uncongested subnetworks.
    pub speed: BTreeMap<Subnetwork, f64>,
    /// Value of time converting time units into money.
    pub value_of_time: f64,
    /// Driving cost per distance unit.
    pub distance_cost: f64,
    /// Volume-delay scale `eta`.
    pub bpr_eta: f64,
    /// Volume-delay exponent `beta`.
    pub bpr_beta: f64,
    /// Car-equivalent size of one bus.
    pub bus_pce: f64,
}

impl Default for ModeParams {
    /// Defaults of the four-node synthetic study.
    fn default() -> Self {
        use BaseMode::*;
        ModeParams {
            meeting_rate: BTreeMap::from([(CarpoolPassenger, 100.0), (RideShare, 200.0), (EHail, 200.0)]),
            service_time: BTreeMap::from([
                (Bus, 0.04),
                (Metro, 0.02),
                (CarpoolPassenger, 0.04),
                (RideShare, 0.05),
                (EHail, 0.03),
            ]),
            parking_time: BTreeMap::from([(Car, 0.17), (Bike, 0.08)]),
            fare: BTreeMap::from([
                (Bus, 0.3),
                (Metro, 0.3),
                (CarpoolPassenger, 0.7),
                (CarpoolDriver, 0.7),
                (RideShare, 0.9),
                (EHail, 1.1),
            ]),
            parking_fee: BTreeMap::from([(Car, 1.0)]),
            seats: BTreeMap::from([(CarpoolPassenger, 1), (RideShare, 2)]),
            speed: BTreeMap::from([
                (Subnetwork::Metro, 60.0),
                (Subnetwork::Bike, 10.0),
                (Subnetwork::Walk, 3.0),
            ]),
            value_of_time: 5.0,
            distance_cost: 0.25,
            bpr_eta: 0.15,
            bpr_beta: 4.0,
            bus_pce: 3.0,
        }
    }
}

fn get(map: &BTreeMap<BaseMode, f64>, m: BaseMode) -> f64 {
    map.get(&m).copied().unwrap_or(0.0)
}

impl ModeParams {
    pub fn meeting_rate(&self, m: BaseMode) -> f64 {
        get(&self.meeting_rate, m)
    }

    /// Service time; carpool drivers perform the same pickups as their
    /// passengers and share the passenger value.
    pub fn service_time(&self, m: BaseMode) -> f64 {
        match m {
            BaseMode::CarpoolDriver => get(&self.service_time, BaseMode::CarpoolPassenger),
            _ => get(&self.service_time, m),
        }
    }

    /// Parking time; carpool drivers park a private car.
    pub fn parking_time(&self, m: BaseMode) -> f64 {
        match m {
            BaseMode::CarpoolDriver => get(&self.parking_time, BaseMode::Car),
            _ => get(&self.parking_time, m),
        }
    }

    pub fn fare(&self, m: BaseMode) -> f64 {
        match m {
            BaseMode::CarpoolDriver if !self.fare.contains_key(&m) => {
                get(&self.fare, BaseMode::CarpoolPassenger)
            }
            _ => get(&self.fare, m),
        }
    }

    pub fn parking_fee(&self, m: BaseMode) -> f64 {
        match m {
            BaseMode::CarpoolDriver => get(&self.parking_fee, BaseMode::Car),
            _ => get(&self.parking_fee, m),
        }
    }

    pub fn seats(&self, m: BaseMode) -> u32 {
        self.seats.get(&m).copied().unwrap_or(1)
    }

    pub fn speed(&self, n: Subnetwork) -> f64 {
        self.speed.get(&n).copied().unwrap_or(0.0)
    }
}

/// Scenario switches: enabled modes and enumeration limits.
#[derive(Clone, Debug, PartialEq)]
pub struct Toggles {
    /// Enabled modes, door-to-door and intermodal.
    pub modes: Vec<Mode>,
    /// Whether intermodal chains in `modes` are offered.
    pub intermodality: bool,
    /// Carpool legs must be strictly longer than this distance.
    pub carpool_min_distance: Option<f64>,
    /// Maximum number of paths per OD pair and mode.
    pub max_paths: usize,
    /// Maximum number of transfers per trip.
    pub max_transfers: usize,
    /// When set, transit lines add vehicles as needed instead of enforcing
    /// their scheduled passenger capacity.
    pub pt_adaptive: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            modes: BaseMode::ALL.iter().map(|&m| Mode::single(m)).collect(),
            intermodality: false,
            carpool_min_distance: None,
            max_paths: 5,
            max_transfers: 1,
            pt_adaptive: false,
        }
    }
}

/// A complete, immutable problem description.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub notes: Option<String>,
    pub nodes: Vec<NodeId>,
    pub transfer_nodes: BTreeSet<NodeId>,
    pub links: Vec<Link>,
    pub pt_lines: Vec<PtLine>,
    pub demand: Vec<Demand>,
    pub params: ModeParams,
    pub fleet_size: u64,
    pub parking_capacity: BTreeMap<NodeId, u64>,
    pub toggles: Toggles,
}

/// Errors raised while loading a scenario document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{context} references unknown node {node}")]
    UnknownNode { context: String, node: NodeId },
    #[error("{context} references unknown link `{link}`")]
    UnknownLink { context: String, link: String },
    #[error("`{field}` must be non-negative, got {value}")]
    NegativeParameter { field: String, value: f64 },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "parse",
            Self::UnknownNode { .. } => "unknown_node",
            Self::UnknownLink { .. } => "unknown_link",
            Self::NegativeParameter { .. } => "negative_parameter",
            Self::Invalid { .. } => "invalid",
        }
    }
}

impl Scenario {
    /// Total number of travellers `Q`.
    pub fn total_demand(&self) -> u64 {
        self.demand.iter().map(|d| d.travellers).sum()
    }

    /// Demand entries with at least one traveller.
    pub fn active_demand(&self) -> impl Iterator<Item = &Demand> {
        self.demand.iter().filter(|d| d.travellers > 0)
    }

    pub fn origins(&self) -> BTreeSet<NodeId> {
        self.active_demand().map(|d| d.origin).collect()
    }

    pub fn destinations(&self) -> BTreeSet<NodeId> {
        self.active_demand().map(|d| d.destination).collect()
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    /// Modes actually offered: door-to-door modes always, intermodal chains
    /// only when intermodality is on and the chain respects `max_transfers`.
    pub fn offered_modes(&self) -> Vec<Mode> {
        let mut out: Vec<Mode> = self
            .toggles
            .modes
            .iter()
            .filter(|m| {
                !m.is_intermodal()
                    || (self.toggles.intermodality && m.transfers() <= self.toggles.max_transfers)
            })
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn base_mode_enabled(&self, m: BaseMode) -> bool {
        self.toggles.modes.iter().any(|x| x.as_single() == Some(m))
    }

    /// Total scheduled frequency of `mode` on every link (indexed like
    /// `links`).
    pub fn line_frequency(&self, mode: BaseMode) -> Vec<f64> {
        let mut freq = vec![0.0; self.links.len()];
        for line in self.pt_lines.iter().filter(|l| l.mode == mode) {
            for (id, f) in line.links.iter().zip(&line.frequency) {
                if let Some(i) = self.link_index(id) {
                    freq[i] += f;
                }
            }
        }
        freq
    }

    /// Total scheduled frequency of `mode` on one link.
    pub fn frequency_on(&self, mode: BaseMode, link_idx: usize) -> f64 {
        let id = &self.links[link_idx].id;
        self.pt_lines
            .iter()
            .filter(|l| l.mode == mode)
            .flat_map(|l| l.links.iter().zip(&l.frequency))
            .filter(|(lid, _)| *lid == id)
            .map(|(_, f)| f)
            .sum()
    }

    /// Scheduled passenger capacity of `mode` on every link.
    pub fn line_capacity(&self, mode: BaseMode) -> Vec<f64> {
        let mut cap = vec![0.0; self.links.len()];
        for line in self.pt_lines.iter().filter(|l| l.mode == mode) {
            for (id, f) in line.links.iter().zip(&line.frequency) {
                if let Some(i) = self.link_index(id) {
                    cap[i] += f * line.veh_capacity;
                }
            }
        }
        cap
    }

    /// Passenger capacity of a single vehicle of `mode` on every link
    /// (largest vehicle among the lines serving it).
    pub fn vehicle_capacity(&self, mode: BaseMode) -> Vec<f64> {
        let mut cap = vec![0.0f64; self.links.len()];
        for line in self.pt_lines.iter().filter(|l| l.mode == mode) {
            for id in &line.links {
                if let Some(i) = self.link_index(id) {
                    cap[i] = cap[i].max(line.veh_capacity);
                }
            }
        }
        cap
    }

    /// Congestion coefficient of a road link.
    pub fn link_delay(&self, link: &Link) -> f64 {
        link.delay.unwrap_or(link.t0 * self.params.bpr_eta)
    }

    /// Returns a copy with every demand entry multiplied by `factor`.
    pub fn with_demand_scaled(&self, factor: u64) -> Scenario {
        let mut s = self.clone();
        for d in &mut s.demand {
            d.travellers *= factor;
        }
        s
    }

    /// Serializes the scenario back into the document schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawScenario::from(self)).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawNode {
    Id(NodeId),
    Full {
        id: NodeId,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        transfer: bool,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    id: IdText,
    tail: NodeId,
    head: NodeId,
    length: f64,
    subnetwork: Subnetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay: Option<f64>,
}

/// Identifiers may be written as strings or bare numbers.
#[derive(Serialize, Deserialize, Clone)]
#[serde(untagged)]
enum IdText {
    Text(String),
    Number(u64),
}

impl IdText {
    fn into_string(self) -> String {
        match self {
            IdText::Text(s) => s,
            IdText::Number(n) => n.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawFrequency {
    Uniform(f64),
    PerLink(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<IdText>,
    mode: BaseMode,
    links: Vec<IdText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequency: Option<RawFrequency>,
    veh_capacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    o: NodeId,
    d: NodeId,
    q: u64,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<BTreeMap<BaseMode, f64>>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    s: Option<BTreeMap<BaseMode, f64>>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    p: Option<BTreeMap<BaseMode, f64>>,
    #[serde(rename = "TF", default, skip_serializing_if = "Option::is_none")]
    tf: Option<BTreeMap<BaseMode, f64>>,
    #[serde(rename = "PF", default, skip_serializing_if = "Option::is_none")]
    pf: Option<BTreeMap<BaseMode, f64>>,
    #[serde(rename = "CAP", default, skip_serializing_if = "Option::is_none")]
    cap: Option<BTreeMap<BaseMode, u32>>,
    #[serde(rename = "Sp", default, skip_serializing_if = "Option::is_none")]
    sp: Option<BTreeMap<Subnetwork, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus_pce: Option<f64>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawToggles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<Mode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intermodality: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    carpool_min_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_transfers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pt_adaptive: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    nodes: Vec<RawNode>,
    links: Vec<RawLink>,
    #[serde(default)]
    pt_lines: Vec<RawLine>,
    #[serde(default)]
    demand: Vec<RawDemand>,
    #[serde(default)]
    params: RawParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fleet_size: Option<u64>,
    #[serde(default)]
    parking_capacity: BTreeMap<String, u64>,
    #[serde(default)]
    toggles: RawToggles,
}

/// Default scheduled frequency of a line when the document omits it.
pub fn default_frequency(mode: BaseMode) -> f64 {
    match mode {
        BaseMode::Metro => 6.0,
        _ => 3.0,
    }
}

/// Default parking capacity of a transfer node.
pub const DEFAULT_PARKING_CAPACITY: u64 = 100;

/// Default shared fleet size.
pub const DEFAULT_FLEET_SIZE: u64 = 1000;

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        let p = &s.params;
        RawScenario {
            name: Some(s.name.clone()),
            notes: s.notes.clone(),
            nodes: s
                .nodes
                .iter()
                .map(|&id| RawNode::Full {
                    id,
                    transfer: s.transfer_nodes.contains(&id),
                })
                .collect(),
            links: s
                .links
                .iter()
                .map(|l| RawLink {
                    id: IdText::Text(l.id.clone()),
                    tail: l.tail,
                    head: l.head,
                    length: l.length,
                    subnetwork: l.subnetwork,
                    t0: (l.subnetwork == Subnetwork::Road).then_some(l.t0),
                    capacity: (l.subnetwork == Subnetwork::Road).then_some(l.capacity),
                    delay: l.delay,
                })
                .collect(),
            pt_lines: s
                .pt_lines
                .iter()
                .map(|l| RawLine {
                    id: Some(IdText::Text(l.id.clone())),
                    mode: l.mode,
                    links: l.links.iter().cloned().map(IdText::Text).collect(),
                    frequency: Some(RawFrequency::PerLink(l.frequency.clone())),
                    veh_capacity: l.veh_capacity,
                })
                .collect(),
            demand: s
                .demand
                .iter()
                .map(|d| RawDemand {
                    o: d.origin,
                    d: d.destination,
                    q: d.travellers,
                })
                .collect(),
            params: RawParams {
                r: Some(p.meeting_rate.clone()),
                s: Some(p.service_time.clone()),
                p: Some(p.parking_time.clone()),
                tf: Some(p.fare.clone()),
                pf: Some(p.parking_fee.clone()),
                cap: Some(p.seats.clone()),
                sp: Some(p.speed.clone()),
                alpha: Some(p.value_of_time),
                gamma: Some(p.distance_cost),
                eta: Some(p.bpr_eta),
                beta: Some(p.bpr_beta),
                bus_pce: Some(p.bus_pce),
            },
            fleet_size: Some(s.fleet_size),
            parking_capacity: s
                .parking_capacity
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            toggles: RawToggles {
                modes: Some(s.toggles.modes.clone()),
                intermodality: Some(s.toggles.intermodality),
                carpool_min_distance: s.toggles.carpool_min_distance,
                max_paths: Some(s.toggles.max_paths),
                max_transfers: Some(s.toggles.max_transfers),
                pt_adaptive: Some(s.toggles.pt_adaptive),
            },
        }
    }
}

fn non_negative(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_nan() || value < 0.0 {
        Err(ScenarioError::NegativeParameter {
            field: field.to_string(),
            value,
        })
    } else {
        Ok(value)
    }
}

fn positive(field: &str, value: f64) -> Result<f64, ScenarioError> {
    non_negative(field, value)?;
    if value == 0.0 || !value.is_finite() {
        return Err(ScenarioError::Invalid {
            field: field.to_string(),
            message: format!("must be positive and finite, got {value}"),
        });
    }
    Ok(value)
}

fn merge<K: Ord + Copy + std::fmt::Display, V: Copy>(
    field: &str,
    defaults: BTreeMap<K, V>,
    given: Option<BTreeMap<K, V>>,
    check: impl Fn(&str, V) -> Result<V, ScenarioError>,
) -> Result<BTreeMap<K, V>, ScenarioError> {
    let mut out = defaults;
    for (k, v) in given.unwrap_or_default() {
        out.insert(k, check(&format!("params.{field}.{k}"), v)?);
    }
    Ok(out)
}

/// Parses a scenario document, applying defaults and checking references.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        path: String::new(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario_from_value(value, text)
}

/// Builds a scenario from an already-parsed document value. `text` is only
/// used to locate errors.
pub fn scenario_from_value(value: serde_json::Value, text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let (line, column) = locate(text, &path);
        ScenarioError::Parse {
            path,
            line,
            column,
            message: e.inner().to_string(),
        }
    })?;
    build(raw)
}

/// Best-effort line/column of the last key of a field path in the source.
fn locate(text: &str, path: &str) -> (usize, usize) {
    let key = path
        .rsplit('.')
        .find(|seg| !seg.starts_with('[') && !seg.is_empty() && seg.chars().all(|c| c.is_alphanumeric() || c == '_'));
    if let Some(key) = key {
        let needle = format!("\"{key}\"");
        if let Some(pos) = text.find(&needle) {
            let line = text[..pos].matches('\n').count() + 1;
            let column = pos - text[..pos].rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
            return (line, column);
        }
    }
    (0, 0)
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let mut nodes = Vec::new();
    let mut transfer_nodes = BTreeSet::new();
    for n in raw.nodes {
        let (id, transfer) = match n {
            RawNode::Id(id) => (id, false),
            RawNode::Full { id, transfer } => (id, transfer),
        };
        if nodes.contains(&id) {
            return Err(ScenarioError::Invalid {
                field: "nodes".into(),
                message: format!("duplicate node {id}"),
            });
        }
        nodes.push(id);
        if transfer {
            transfer_nodes.insert(id);
        }
    }
    let node_set: BTreeSet<NodeId> = nodes.iter().copied().collect();

    let mut links: Vec<Link> = Vec::with_capacity(raw.links.len());
    for (i, l) in raw.links.into_iter().enumerate() {
        let id = l.id.into_string();
        let ctx = format!("links[{i}] `{id}`");
        if links.iter().any(|x| x.id == id) {
            return Err(ScenarioError::Invalid {
                field: format!("links[{i}].id"),
                message: format!("duplicate link id `{id}`"),
            });
        }
        for node in [l.tail, l.head] {
            if !node_set.contains(&node) {
                return Err(ScenarioError::UnknownNode { context: ctx.clone(), node });
            }
        }
        if l.tail == l.head {
            return Err(ScenarioError::Invalid {
                field: format!("links[{i}]"),
                message: "self loops are not allowed".into(),
            });
        }
        positive(&format!("links[{i}].length"), l.length)?;
        let road = l.subnetwork == Subnetwork::Road;
        let t0 = non_negative(&format!("links[{i}].t0"), l.t0.unwrap_or(0.0))?;
        let capacity = non_negative(&format!("links[{i}].capacity"), l.capacity.unwrap_or(0.0))?;
        if let Some(d) = l.delay {
            non_negative(&format!("links[{i}].delay"), d)?;
        }
        if road && l.t0.is_none() {
            return Err(ScenarioError::Invalid {
                field: format!("links[{i}].t0"),
                message: "road links need a free-flow time".into(),
            });
        }
        if road && l.capacity.is_none() {
            return Err(ScenarioError::Invalid {
                field: format!("links[{i}].capacity"),
                message: "road links need a capacity".into(),
            });
        }
        links.push(Link {
            id,
            tail: l.tail,
            head: l.head,
            length: l.length,
            subnetwork: l.subnetwork,
            t0,
            capacity,
            delay: l.delay,
        });
    }
    let link_pos: HashMap<&str, usize> = links.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();

    let mut pt_lines = Vec::new();
    for (i, l) in raw.pt_lines.into_iter().enumerate() {
        let id = l.id.map(IdText::into_string).unwrap_or_else(|| format!("line{}", i + 1));
        if !l.mode.is_transit() {
            return Err(ScenarioError::Invalid {
                field: format!("pt_lines[{i}].mode"),
                message: format!("`{}` is not a transit mode", l.mode),
            });
        }
        let ids: Vec<String> = l.links.into_iter().map(IdText::into_string).collect();
        if ids.is_empty() {
            return Err(ScenarioError::Invalid {
                field: format!("pt_lines[{i}].links"),
                message: "a line needs at least one link".into(),
            });
        }
        for (k, lid) in ids.iter().enumerate() {
            let Some(&pos) = link_pos.get(lid.as_str()) else {
                return Err(ScenarioError::UnknownLink {
                    context: format!("pt_lines[{i}]"),
                    link: lid.clone(),
                });
            };
            if links[pos].subnetwork != l.mode.subnetwork() {
                return Err(ScenarioError::Invalid {
                    field: format!("pt_lines[{i}].links[{k}]"),
                    message: format!(
                        "{} lines run on {} links, `{lid}` is {}",
                        l.mode,
                        l.mode.subnetwork(),
                        links[pos].subnetwork
                    ),
                });
            }
        }
        let frequency = match l.frequency {
            None => vec![default_frequency(l.mode); ids.len()],
            Some(RawFrequency::Uniform(f)) => vec![f; ids.len()],
            Some(RawFrequency::PerLink(v)) => {
                if v.len() != ids.len() {
                    return Err(ScenarioError::Invalid {
                        field: format!("pt_lines[{i}].frequency"),
                        message: format!("expected {} values, got {}", ids.len(), v.len()),
                    });
                }
                v
            }
        };
        for (k, f) in frequency.iter().enumerate() {
            positive(&format!("pt_lines[{i}].frequency[{k}]"), *f)?;
        }
        positive(&format!("pt_lines[{i}].veh_capacity"), l.veh_capacity)?;
        pt_lines.push(PtLine {
            id,
            mode: l.mode,
            links: ids,
            frequency,
            veh_capacity: l.veh_capacity,
        });
    }

    let mut demand: Vec<Demand> = Vec::new();
    for (i, d) in raw.demand.into_iter().enumerate() {
        for node in [d.o, d.d] {
            if !node_set.contains(&node) {
                return Err(ScenarioError::UnknownNode {
                    context: format!("demand[{i}]"),
                    node,
                });
            }
        }
        if d.o == d.d {
            return Err(ScenarioError::Invalid {
                field: format!("demand[{i}]"),
                message: "origin and destination coincide".into(),
            });
        }
        if demand.iter().any(|x| x.origin == d.o && x.destination == d.d) {
            return Err(ScenarioError::Invalid {
                field: format!("demand[{i}]"),
                message: format!("duplicate OD pair ({}, {})", d.o, d.d),
            });
        }
        demand.push(Demand {
            origin: d.o,
            destination: d.d,
            travellers: d.q,
        });
    }

    let defaults = ModeParams::default();
    let rp = raw.params;
    let params = ModeParams {
        meeting_rate: merge("R", defaults.meeting_rate, rp.r, positive)?,
        service_time: merge("S", defaults.service_time, rp.s, non_negative)?,
        parking_time: merge("P", defaults.parking_time, rp.p, non_negative)?,
        fare: merge("TF", defaults.fare, rp.tf, non_negative)?,
        parking_fee: merge("PF", defaults.parking_fee, rp.pf, non_negative)?,
        seats: merge("CAP", defaults.seats, rp.cap, |f, v: u32| {
            if v == 0 {
                Err(ScenarioError::Invalid {
                    field: f.to_string(),
                    message: "at least one seat is required".into(),
                })
            } else {
                Ok(v)
            }
        })?,
        speed: merge("Sp", defaults.speed, rp.sp, positive)?,
        value_of_time: non_negative("params.alpha", rp.alpha.unwrap_or(defaults.value_of_time))?,
        distance_cost: non_negative("params.gamma", rp.gamma.unwrap_or(defaults.distance_cost))?,
        bpr_eta: non_negative("params.eta", rp.eta.unwrap_or(defaults.bpr_eta))?,
        bpr_beta: rp.beta.unwrap_or(defaults.bpr_beta),
        bus_pce: non_negative("params.bus_pce", rp.bus_pce.unwrap_or(defaults.bus_pce))?,
    };
    if params.bpr_beta.is_nan() || params.bpr_beta < 1.0 {
        return Err(ScenarioError::Invalid {
            field: "params.beta".into(),
            message: format!("must be at least 1, got {}", params.bpr_beta),
        });
    }

    let mut parking_capacity = BTreeMap::new();
    for (k, v) in raw.parking_capacity {
        let node: NodeId = k.parse().map_err(|_| ScenarioError::Invalid {
            field: format!("parking_capacity.{k}"),
            message: "keys must be node ids".into(),
        })?;
        if !node_set.contains(&node) {
            return Err(ScenarioError::UnknownNode {
                context: "parking_capacity".into(),
                node,
            });
        }
        parking_capacity.insert(node, v);
    }
    for &t in &transfer_nodes {
        parking_capacity.entry(t).or_insert(DEFAULT_PARKING_CAPACITY);
    }

    let dt = Toggles::default();
    let rt = raw.toggles;
    if let Some(d) = rt.carpool_min_distance {
        non_negative("toggles.carpool_min_distance", d)?;
    }
    let toggles = Toggles {
        modes: rt.modes.unwrap_or(dt.modes),
        intermodality: rt.intermodality.unwrap_or(dt.intermodality),
        carpool_min_distance: rt.carpool_min_distance,
        max_paths: rt.max_paths.unwrap_or(dt.max_paths),
        max_transfers: rt.max_transfers.unwrap_or(dt.max_transfers),
        pt_adaptive: rt.pt_adaptive.unwrap_or(dt.pt_adaptive),
    };
    if toggles.max_paths == 0 {
        return Err(ScenarioError::Invalid {
            field: "toggles.max_paths".into(),
            message: "at least one path per OD pair and mode is required".into(),
        });
    }

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| "scenario".to_string()),
        notes: raw.notes,
        nodes,
        transfer_nodes,
        links,
        pt_lines,
        demand,
        params,
        fleet_size: raw.fleet_size.unwrap_or(DEFAULT_FLEET_SIZE),
        parking_capacity,
        toggles,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Category of a validation finding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DisconnectedOd,
    TransferWithoutMetro,
    TransferWithoutRoad,
    ZeroCapacityRoadLink,
    CarpoolWithoutDriver,
    DriverWithoutCarpool,
    ChainLegDisabled,
    MeetingRateMissing,
    LineNotContiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// Result of [`validate_scenario`]; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

/// Nodes reachable from `from` using only links of `mode`'s subnetwork
/// (and, for transit, links served by a line).
fn reachable(s: &Scenario, from: NodeId, mode: BaseMode) -> BTreeSet<NodeId> {
    let served = if mode.is_transit() {
        Some(s.line_frequency(mode))
    } else {
        None
    };
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for (i, l) in s.links.iter().enumerate() {
            let usable = l.subnetwork == mode.subnetwork()
                && served.as_ref().is_none_or(|f| f[i] > 0.0);
            if usable && l.tail == n && seen.insert(l.head) {
                queue.push_back(l.head);
            }
        }
    }
    seen
}

/// Reports every rule violation; never fails.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    for &t in &s.transfer_nodes {
        let touches = |n: Subnetwork| {
            s.links
                .iter()
                .any(|l| l.subnetwork == n && (l.tail == t || l.head == t))
        };
        if !touches(Subnetwork::Metro) {
            report.push(
                ViolationKind::TransferWithoutMetro,
                format!("transfer node {t} unreachable by metro"),
            );
        }
        if !touches(Subnetwork::Road) {
            report.push(
                ViolationKind::TransferWithoutRoad,
                format!("transfer node {t} has no road link"),
            );
        }
    }
    for l in s.links.iter().filter(|l| l.subnetwork == Subnetwork::Road) {
        if l.capacity <= 0.0 || (l.t0 <= 0.0 && l.delay.unwrap_or(0.0) <= 0.0) {
            report.push(
                ViolationKind::ZeroCapacityRoadLink,
                format!("road link `{}` has zero capacity or zero travel time", l.id),
            );
        }
    }
    let cp = s.base_mode_enabled(BaseMode::CarpoolPassenger);
    let cd = s.base_mode_enabled(BaseMode::CarpoolDriver);
    if cp && !cd {
        report.push(
            ViolationKind::CarpoolWithoutDriver,
            "carpool passengers enabled without carpool drivers".into(),
        );
    }
    if cd && !cp {
        report.push(
            ViolationKind::DriverWithoutCarpool,
            "carpool drivers enabled without carpool passengers".into(),
        );
    }
    for m in s.toggles.modes.iter().filter(|m| m.is_intermodal()) {
        for leg in m.legs() {
            if !s.base_mode_enabled(*leg) {
                report.push(
                    ViolationKind::ChainLegDisabled,
                    format!("intermodal mode `{m}` uses disabled mode `{leg}`"),
                );
            }
        }
    }
    for m in [BaseMode::CarpoolPassenger, BaseMode::RideShare, BaseMode::EHail] {
        if s.base_mode_enabled(m) && s.params.meeting_rate(m) <= 0.0 {
            report.push(
                ViolationKind::MeetingRateMissing,
                format!("mode `{m}` enabled without a meeting rate"),
            );
        }
    }
    for line in &s.pt_lines {
        let joined = line.links.windows(2).all(|w| {
            match (s.link_index(&w[0]), s.link_index(&w[1])) {
                (Some(a), Some(b)) => s.links[a].head == s.links[b].tail,
                _ => false,
            }
        });
        if !joined {
            report.push(
                ViolationKind::LineNotContiguous,
                format!("line `{}` has consecutive links that do not connect", line.id),
            );
        }
    }

    let offered = s.offered_modes();
    let mut reach_cache: HashMap<(NodeId, BaseMode), BTreeSet<NodeId>> = HashMap::new();
    let mut reach = |from: NodeId, m: BaseMode| -> BTreeSet<NodeId> {
        reach_cache.entry((from, m)).or_insert_with(|| reachable(s, from, m)).clone()
    };
    for d in s.active_demand() {
        let connected = offered.iter().any(|mode| {
            let mut frontier = BTreeSet::from([d.origin]);
            for (k, leg) in mode.legs().iter().enumerate() {
                let mut next = BTreeSet::new();
                for &n in &frontier {
                    next.extend(reach(n, *leg));
                }
                next.remove(&d.origin);
                if k + 1 < mode.legs().len() {
                    next.retain(|n| s.transfer_nodes.contains(n));
                }
                frontier = next;
            }
            frontier.contains(&d.destination)
        });
        if !connected {
            report.push(
                ViolationKind::DisconnectedOd,
                format!(
                    "OD pair ({}, {}) is not connected by any enabled mode",
                    d.origin, d.destination
                ),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "nodes": [1, {"id": 2, "transfer": true}, 3],
        "links": [
            {"id": "a", "tail": 1, "head": 2, "length": 10, "subnetwork": "RN", "t0": 1, "capacity": 100},
            {"id": "b", "tail": 2, "head": 3, "length": 60, "subnetwork": "MN"}
        ],
        "pt_lines": [{"mode": "M", "links": ["b"], "veh_capacity": 50}],
        "demand": [{"o": 1, "d": 3, "q": 2}],
        "toggles": {"modes": ["car", "M", "car&M"], "intermodality": true}
    }"#;

    #[test]
    fn defaults_are_applied() {
        let s = load_scenario(TINY).unwrap();
        assert_eq!(s.params.value_of_time, 5.0);
        assert_eq!(s.pt_lines[0].frequency, vec![6.0]);
        assert_eq!(s.parking_capacity[&2], DEFAULT_PARKING_CAPACITY);
        assert_eq!(s.fleet_size, DEFAULT_FLEET_SIZE);
        assert!(validate_scenario(&s).is_valid());
    }

    #[test]
    fn round_trip_is_identity() {
        let s = load_scenario(TINY).unwrap();
        let again = load_scenario(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_node_is_reported() {
        let doc = TINY.replace("\"head\": 3", "\"head\": 9");
        assert!(matches!(
            load_scenario(&doc),
            Err(ScenarioError::UnknownNode { node: 9, .. })
        ));
    }

    #[test]
    fn negative_parameter_is_reported() {
        let doc = TINY.replace("\"length\": 10", "\"length\": -10");
        assert!(matches!(
            load_scenario(&doc),
            Err(ScenarioError::NegativeParameter { .. })
        ));
    }

    #[test]
    fn parse_error_carries_field_path() {
        let doc = TINY.replace("\"q\": 2", "\"q\": \"two\"");
        match load_scenario(&doc) {
            Err(ScenarioError::Parse { path, line, .. }) => {
                assert_eq!(path, "demand[0].q");
                assert!(line > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
