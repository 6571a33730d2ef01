//! Generic mixed-integer linear program with convex epigraph terms.

use std::fmt;

use serde::Serialize;

use super::pwl::ConvexFn;
use crate::costs::Principle;

/// Role of a variable in the traffic model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarFamily {
    PathFlow,
    DriverStop,
    EhailVehicles,
    RideVehicles,
    RideshareVehicles,
    EmptyVehicles,
    OccupiedVehicles,
    OccupiedByStop,
    EmptyCount,
    IdleVehicles,
    LinkFlow,
    LinkModeFlow,
    ModeDemand,
    TransitUnits,
    Epigraph,
    OriginLinkFlow,
    BilinearBit,
    BilinearPart,
    BilinearProduct,
    /// Variables of programs not built from a scenario.
    Generic,
}

impl VarFamily {
    /// The sign/integrality family whose bounds this variable carries.
    pub fn domain_family(self) -> Option<ConstraintFamily> {
        use VarFamily::*;
        match self {
            PathFlow | LinkFlow | LinkModeFlow | ModeDemand => Some(ConstraintFamily::FlowDomain),
            DriverStop | EhailVehicles | RideVehicles | RideshareVehicles => {
                Some(ConstraintFamily::MatchingDomain)
            }
            EmptyVehicles | OccupiedVehicles | OccupiedByStop | EmptyCount | IdleVehicles => {
                Some(ConstraintFamily::FleetDomain)
            }
            _ => None,
        }
    }
}

/// Role of a constraint row in the traffic model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    LinkModeFlow,
    DemandConservation,
    DriverStops,
    CarpoolSeats,
    DriverPassengers,
    EhailCoupling,
    RideshareVehicles,
    RideshareSeats,
    RidesharePassengers,
    RideshareNoSolo,
    OccupiedByStop,
    OccupiedVehicles,
    EmptyVehicles,
    NodeBalance,
    PickupAvailability,
    FleetSize,
    /// Sign and integrality of the flow variables (carried by bounds).
    FlowDomain,
    /// Sign and integrality of the matching variables (carried by bounds).
    MatchingDomain,
    /// Sign and integrality of the fleet variables (carried by bounds).
    FleetDomain,
    LinkAggregation,
    ParkingCapacity,
    IntermodalCarpoolSeats,
    IntermodalDriverPassengers,
    IntermodalCarpoolCoupling,
    IntermodalDriverCoupling,
    IntermodalRideshareSeats,
    IntermodalEhailCoupling,
    IntermodalRidesharePassengers,
    IntermodalLinkModeFlow,
    TransitCapacity,
    TransitUnits,
    CongestionEpigraph,
    WaitingEpigraph,
    BilinearProduct,
    ModeDemand,
    /// Rows of programs not built from a scenario.
    Generic,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 36] = {
        use ConstraintFamily::*;
        [
            LinkModeFlow,
            DemandConservation,
            DriverStops,
            CarpoolSeats,
            DriverPassengers,
            EhailCoupling,
            RideshareVehicles,
            RideshareSeats,
            RidesharePassengers,
            RideshareNoSolo,
            OccupiedByStop,
            OccupiedVehicles,
            EmptyVehicles,
            NodeBalance,
            PickupAvailability,
            FleetSize,
            FlowDomain,
            MatchingDomain,
            FleetDomain,
            LinkAggregation,
            ParkingCapacity,
            IntermodalCarpoolSeats,
            IntermodalDriverPassengers,
            IntermodalCarpoolCoupling,
            IntermodalDriverCoupling,
            IntermodalRideshareSeats,
            IntermodalEhailCoupling,
            IntermodalRidesharePassengers,
            IntermodalLinkModeFlow,
            TransitCapacity,
            TransitUnits,
            CongestionEpigraph,
            WaitingEpigraph,
            BilinearProduct,
            ModeDemand,
            Generic,
        ]
    };

    /// Families that belong to the traffic model proper (as opposed to
    /// linearization artifacts and design additions).
    pub fn is_core(self) -> bool {
        use ConstraintFamily::*;
        !matches!(
            self,
            TransitCapacity
                | TransitUnits
                | CongestionEpigraph
                | WaitingEpigraph
                | BilinearProduct
                | ModeDemand
                | Generic
        )
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub family: VarFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub families: Vec<ConstraintFamily>,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `value >= f(argument)` for a convex `f`, enforced by supporting cuts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Epigraph {
    pub value: usize,
    pub argument: usize,
    pub function: ConvexFn,
    pub family: ConstraintFamily,
}

/// A product term `coef * left * right` kept in the objective of a
/// continuous program that was not linearized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearTerm {
    pub left: usize,
    pub right: usize,
    pub coef: f64,
}

/// A minimization program.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MathProgram {
    pub name: String,
    pub principle: Option<Principle>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub epigraphs: Vec<Epigraph>,
    pub bilinear: Vec<BilinearTerm>,
}

impl MathProgram {
    pub fn new(name: impl Into<String>) -> Self {
        MathProgram {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integer: bool,
        family: VarFamily,
    ) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
            family,
        });
        self.objective.push(0.0);
        self.variables.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        families: Vec<ConstraintFamily>,
    ) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        let mut sorted = terms;
        sorted.sort_by_key(|t| t.0);
        for (j, a) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
            families,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    /// Drops every integrality flag.
    pub fn relaxed(&self) -> MathProgram {
        let mut p = self.clone();
        for v in &mut p.variables {
            v.integer = false;
        }
        p
    }

    /// Objective value of the linear part plus declared bilinear terms.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            + self
                .bilinear
                .iter()
                .map(|b| b.coef * x[b.left] * x[b.right])
                .sum::<f64>()
    }

    /// Objective value with every epigraph variable replaced by its exact
    /// function value.
    pub fn exact_objective(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        for e in &self.epigraphs {
            y[e.value] = e.function.eval(x[e.argument]);
        }
        self.objective_value(&y)
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Every family that tags at least one row, epigraph or variable domain.
    pub fn families(&self) -> std::collections::BTreeSet<ConstraintFamily> {
        self.constraints
            .iter()
            .flat_map(|c| c.families.iter().copied())
            .chain(self.epigraphs.iter().map(|e| e.family))
            .chain(self.variables.iter().filter_map(|v| v.family.domain_family()))
            .collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}
