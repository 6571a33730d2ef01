//! Mixed-integer solver: LP relaxations by a bounded primal simplex, lazy
//! supporting cuts for convex epigraph terms, and best-bound
//! branch-and-bound.
//!
//! ```
//! use mmta::model::{MathProgram, Sense, ConstraintFamily, VarFamily};
//! use mmta::solver::{solve, SolverOptions, SolveStatus};
//!
//! // min x + y  s.t.  2x + 2y >= 3, x and y integer in [0, 5]
//! let mut p = MathProgram::new("demo");
//! let x = p.add_var("x", 0.0, 5.0, true, VarFamily::Generic);
//! let y = p.add_var("y", 0.0, 5.0, true, VarFamily::Generic);
//! p.objective[x] = 1.0;
//! p.objective[y] = 1.0;
//! p.add_row("cover", vec![(x, 2.0), (y, 2.0)], Sense::Ge, 3.0, vec![ConstraintFamily::Generic]);
//! let sol = solve(&p, &SolverOptions::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert_eq!(sol.objective, 2.0);
//! ```

pub mod bnb;
pub mod lp;
pub mod mps;

use std::time::Duration;

use serde::Serialize;

pub use bnb::{solve, solve_from};
pub use lp::{solve_lp, LpOptions, LpResult, LpStatus, Simplex};
pub use mps::{export_mps, matrix_hash, parse_mps, to_mps, MpsError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which the
    /// search stops.
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Accepted for interface compatibility; nodes are processed in a fixed
    /// sequential order so results do not depend on it.
    pub threads: usize,
    /// Rounds of epigraph cut separation per node.
    pub cut_rounds: usize,
    pub branching: BranchingRule,
    pub lp: LpOptions,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    #[default]
    MostFractional,
    PseudoCost,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-6,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            threads: 1,
            cut_rounds: 200,
            branching: BranchingRule::MostFractional,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// An incumbent exists but a limit stopped the search before the gap
    /// closed.
    Feasible,
    Infeasible,
    Unbounded,
    /// A limit stopped the search before any incumbent was found.
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Variable values of the incumbent (empty when there is none).
    pub x: Vec<f64>,
    /// Objective of the incumbent with convex terms evaluated exactly.
    pub objective: f64,
    /// Proven lower bound on the optimal objective.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub cuts: usize,
    /// Objective of the root relaxation.
    pub root_bound: f64,
    /// Objective of every new incumbent, in the order they were found.
    pub incumbents: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl Solution {
    pub fn has_incumbent(&self) -> bool {
        self.objective.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("the program has {0} product terms; continuous programs with products are for export only")]
    Bilinear(usize),
    #[error("invalid solver option: {0}")]
    Options(String),
}

/// Relative gap between an incumbent value and a bound.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}
