//! Travel modes, subnetworks, and intermodal mode chains.
//!
//! A [`BaseMode`] is one of the nine elementary ways of moving through the
//! network. A [`Mode`] is a non-empty chain of base modes: a chain of length
//! one is an ordinary door-to-door mode, longer chains are intermodal trips
//! whose consecutive legs meet at transfer nodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Tag of the physical layer a link belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subnetwork {
    /// Road network, shared by private cars, buses and fleet vehicles.
    Road,
    /// Metro network.
    Metro,
    /// Pedestrian network.
    Walk,
    /// Cycling network.
    Bike,
}

impl Subnetwork {
    pub const ALL: [Subnetwork; 4] = [Self::Road, Self::Metro, Self::Walk, Self::Bike];

    /// Short code used in scenario documents (`RN`, `MN`, `WN`, `BN`).
    pub fn code(self) -> &'static str {
        match self {
            Self::Road => "RN",
            Self::Metro => "MN",
            Self::Walk => "WN",
            Self::Bike => "BN",
        }
    }

    /// Parses a subnetwork code. The single-letter mode aliases `M`, `W` and
    /// `B` are accepted for the non-road layers.
    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "RN" => Some(Self::Road),
            "MN" | "M" => Some(Self::Metro),
            "WN" | "W" => Some(Self::Walk),
            "BN" | "B" => Some(Self::Bike),
            _ => None,
        }
    }
}

impl fmt::Display for Subnetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for Subnetwork {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Subnetwork {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Subnetwork::from_code(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown subnetwork `{raw}`")))
    }
}

/// An elementary travel mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseMode {
    Car,
    Bus,
    Metro,
    Walk,
    Bike,
    /// A commuter driving their own car and offering seats.
    CarpoolDriver,
    /// A commuter riding in a carpool driver's car.
    CarpoolPassenger,
    /// A fleet vehicle serving a single passenger door to door.
    EHail,
    /// A fleet vehicle shared by two passengers with possibly different trips.
    RideShare,
}

impl BaseMode {
    pub const ALL: [BaseMode; 9] = [
        Self::Car,
        Self::Bus,
        Self::Metro,
        Self::Walk,
        Self::Bike,
        Self::CarpoolDriver,
        Self::CarpoolPassenger,
        Self::EHail,
        Self::RideShare,
    ];

    /// Short code used in scenario documents and reports.
    pub fn code(self) -> &'static str {
        match self {
            Self::Car => "car",
            Self::Bus => "bus",
            Self::Metro => "M",
            Self::Walk => "W",
            Self::Bike => "B",
            Self::CarpoolDriver => "CD",
            Self::CarpoolPassenger => "CP",
            Self::EHail => "EH",
            Self::RideShare => "RS",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.code().eq_ignore_ascii_case(code))
    }

    /// The only subnetwork this mode may travel on.
    pub fn subnetwork(self) -> Subnetwork {
        match self {
            Self::Metro => Subnetwork::Metro,
            Self::Walk => Subnetwork::Walk,
            Self::Bike => Subnetwork::Bike,
            _ => Subnetwork::Road,
        }
    }

    /// Scheduled public transport.
    pub fn is_transit(self) -> bool {
        matches!(self, Self::Bus | Self::Metro)
    }

    /// Shared services whose waiting time grows with their own demand.
    pub fn is_shared_service(self) -> bool {
        matches!(self, Self::CarpoolPassenger | Self::EHail | Self::RideShare)
    }

    /// Modes whose travellers are themselves counted as link flow units.
    pub fn counts_as_traffic(self) -> bool {
        matches!(self, Self::Car | Self::CarpoolDriver | Self::Walk | Self::Bike)
    }

    /// Modes whose users depend on a partner (another commuter or a fleet
    /// vehicle) being assigned to them.
    pub fn is_matched(self) -> bool {
        matches!(
            self,
            Self::CarpoolDriver | Self::CarpoolPassenger | Self::EHail | Self::RideShare
        )
    }

    /// Modes that leave a private vehicle behind at the end of their leg and
    /// therefore can only start an intermodal trip.
    pub fn needs_parking(self) -> bool {
        matches!(self, Self::Car | Self::CarpoolDriver)
    }

    /// Modes served by the shared fleet of size `fleet_size`.
    pub fn uses_fleet(self) -> bool {
        matches!(self, Self::EHail | Self::RideShare)
    }
}

impl fmt::Display for BaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for BaseMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for BaseMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        BaseMode::from_code(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown mode `{raw}`")))
    }
}

/// Error returned when a mode label cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid mode `{label}`: {reason}")]
pub struct ModeParseError {
    pub label: String,
    pub reason: String,
}

/// A door-to-door mode or an intermodal chain of base modes.
///
/// Intermodal chains are written with `&` between legs, e.g. `car&M` for
/// park-and-ride or `M&RS` for a metro trip finished by ridesharing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    legs: Vec<BaseMode>,
}

impl Mode {
    pub fn single(mode: BaseMode) -> Self {
        Mode { legs: vec![mode] }
    }

    /// Builds a chain, rejecting empty chains, consecutive repeats, and
    /// private vehicles used after the first leg.
    pub fn chain(legs: &[BaseMode]) -> Result<Self, ModeParseError> {
        let label = legs.iter().map(|m| m.code()).collect::<Vec<_>>().join("&");
        let fail = |reason: &str| ModeParseError {
            label: label.clone(),
            reason: reason.to_string(),
        };
        if legs.is_empty() {
            return Err(fail("empty mode chain"));
        }
        if legs.windows(2).any(|w| w[0] == w[1]) {
            return Err(fail("consecutive legs use the same mode"));
        }
        if legs.iter().skip(1).any(|m| m.needs_parking()) {
            return Err(fail("a private car can only be used on the first leg"));
        }
        Ok(Mode {
            legs: legs.to_vec(),
        })
    }

    pub fn legs(&self) -> &[BaseMode] {
        &self.legs
    }

    pub fn is_intermodal(&self) -> bool {
        self.legs.len() > 1
    }

    /// Number of mode changes along the trip.
    pub fn transfers(&self) -> usize {
        self.legs.len() - 1
    }

    /// The base mode of a door-to-door trip.
    pub fn as_single(&self) -> Option<BaseMode> {
        (self.legs.len() == 1).then(|| self.legs[0])
    }

    pub fn contains(&self, base: BaseMode) -> bool {
        self.legs.contains(&base)
    }

    pub fn label(&self) -> String {
        self.legs.iter().map(|m| m.code()).collect::<Vec<_>>().join("&")
    }
}

impl From<BaseMode> for Mode {
    fn from(m: BaseMode) -> Self {
        Mode::single(m)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Mode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut legs = Vec::new();
        for part in s.split('&') {
            let base = BaseMode::from_code(part.trim()).ok_or_else(|| ModeParseError {
                label: s.to_string(),
                reason: format!("unknown mode `{}`", part.trim()),
            })?;
            legs.push(base);
        }
        Mode::chain(&legs)
    }
}

impl Serialize for Mode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for label in ["car", "bus", "M", "W", "B", "CD", "CP", "EH", "RS", "car&M", "M&RS"] {
            let mode: Mode = label.parse().unwrap();
            assert_eq!(mode.label(), label);
        }
    }

    #[test]
    fn private_car_cannot_follow_transfer() {
        assert!("M&car".parse::<Mode>().is_err());
        assert!("M&CD".parse::<Mode>().is_err());
        assert!("M&M".parse::<Mode>().is_err());
    }

    #[test]
    fn subnetwork_aliases() {
        assert_eq!(Subnetwork::from_code("M"), Some(Subnetwork::Metro));
        assert_eq!(Subnetwork::from_code("WN"), Some(Subnetwork::Walk));
        assert_eq!(Subnetwork::from_code("XX"), None);
    }
}
