//! Multimodal traffic assignment with shared mobility services.
//!
//! A [`network::Scenario`] describes a road network with walking, cycling
//! and metro subnetworks, scheduled bus and metro lines, commuter demand and
//! the parameters of every travel mode, including carpooling, e-hailing and
//! ridesharing. The crate enumerates candidate paths per mode
//! ([`paths`]), assembles a mixed-integer linear program whose optimum is a
//! user equilibrium or a system optimum ([`model`]), solves it with its own
//! branch-and-bound ([`solver`]) and analyses the result ([`analysis`]).
//!
//! ```
//! use mmta::{costs::Principle, network::load_scenario, paths::PathCatalog, run};
//!
//! let doc = r#"{
//!   "nodes": [1, 2],
//!   "links": [
//!     {"id": "a", "tail": 1, "head": 2, "length": 1, "subnetwork": "RN", "t0": 1, "capacity": 10},
//!     {"id": "w", "tail": 1, "head": 2, "length": 1, "subnetwork": "WN"}
//!   ],
//!   "demand": [{"o": 1, "d": 2, "q": 3}],
//!   "toggles": {"modes": ["car", "W"]}
//! }"#;
//! let s = load_scenario(doc).unwrap();
//! let catalog = PathCatalog::build(&s);
//! let result = run::run(&s, &catalog, Principle::Ue, &run::RunOptions::default()).unwrap();
//! assert!(result.check.is_feasible());
//! assert_eq!(result.assignment.path_flow.iter().sum::<f64>(), 3.0);
//! ```

pub mod analysis;
pub mod assignment;
pub mod check;
pub mod costs;
pub mod mode;
pub mod model;
pub mod network;
pub mod oracle;
pub mod paths;
pub mod run;
pub mod solver;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/principles.md")]
    mod principles {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
