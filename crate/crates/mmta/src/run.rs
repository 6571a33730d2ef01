//! End-to-end pipeline: path catalog, program, solve, decoded assignment
//! and the analyses of the result.
//!
//! Under user equilibrium, passengers riding on road links (bus, carpool,
//! e-hailing and ridesharing users) are charged the travel time of the
//! traffic they share the road with. That time depends on the solution, so
//! the program is rebuilt with the travel times of the previous solution
//! until the link flows repeat.

use std::time::Instant;

use serde::Serialize;

use crate::analysis::{aggregate_flows, total_system_cost, SystemCost};
use crate::assignment::Assignment;
use crate::check::{check_assignment, CheckReport};
use crate::costs::{free_flow_times, link_travel_time, FlowState, Principle};
use crate::mode::Subnetwork;
use crate::model::{build_program, BuildOptions, BuiltModel, ModelError};
use crate::network::Scenario;
use crate::paths::PathCatalog;
use crate::solver::{solve_from, SolveError, SolveStatus, Solution, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOptions {
    pub build: BuildOptions,
    pub solver: SolverOptions,
    /// Largest number of programs solved to settle passengers' travel times.
    pub max_rounds: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            build: BuildOptions::default(),
            solver: SolverOptions::default(),
            max_rounds: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solver finished with status {0:?} and no solution")]
    NoSolution(SolveStatus),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Model(_) => "model",
            RunError::Solve(_) => "solver",
            RunError::NoSolution(SolveStatus::Infeasible) => "infeasible",
            RunError::NoSolution(SolveStatus::Unbounded) => "unbounded",
            RunError::NoSolution(_) => "limit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub principle: Principle,
    pub model: BuiltModel,
    pub solution: Solution,
    pub assignment: Assignment,
    pub flows: FlowState,
    pub cost: SystemCost,
    pub check: CheckReport,
    /// Passenger travel times the final program was built with.
    pub passenger_time: Vec<f64>,
    /// Programs solved.
    pub rounds: usize,
    /// Whether the final link flows reproduce the passenger travel times
    /// the program was built with.
    pub settled: bool,
}

fn rides_on_road(catalog: &PathCatalog) -> bool {
    catalog.paths.iter().any(|p| {
        p.legs
            .iter()
            .any(|l| l.mode.subnetwork() == Subnetwork::Road && !l.mode.counts_as_traffic())
    })
}

/// Builds the program the first round of [`run`] solves.
pub fn initial_model(
    s: &Scenario,
    catalog: &PathCatalog,
    principle: Principle,
    opts: &RunOptions,
) -> Result<BuiltModel, ModelError> {
    let build = BuildOptions {
        passenger_time: Some(opts.build.passenger_time.clone().unwrap_or_else(|| free_flow_times(s))),
        ..opts.build.clone()
    };
    build_program(s, catalog, principle, &build)
}

/// Solves `s` under `principle`.
pub fn run(s: &Scenario, catalog: &PathCatalog, principle: Principle, opts: &RunOptions) -> Result<RunResult, RunError> {
    let mut passenger_time = opts.build.passenger_time.clone().unwrap_or_else(|| free_flow_times(s));
    let iterate = principle == Principle::Ue && rides_on_road(catalog);
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut rounds = 0;
    let mut previous: Option<Vec<f64>> = None;
    let started = Instant::now();
    loop {
        rounds += 1;
        let build = BuildOptions {
            passenger_time: Some(passenger_time.clone()),
            ..opts.build.clone()
        };
        let model = build_program(s, catalog, principle, &build)?;
        // Only costs change between rounds, so the previous optimum is a
        // feasible starting incumbent.
        let solver = SolverOptions {
            time_limit: opts.solver.time_limit.map(|t| t.saturating_sub(started.elapsed())),
            ..opts.solver.clone()
        };
        let solution = solve_from(&model.program, &solver, previous.as_deref())?;
        if !solution.has_incumbent() {
            return Err(RunError::NoSolution(solution.status));
        }
        let mut assignment = model.decode(&solution.x);
        if opts.build.integer {
            assignment = assignment.rounded();
        }
        let flows = aggregate_flows(s, catalog, &model.space, &assignment);
        let next: Vec<f64> = s
            .links
            .iter()
            .enumerate()
            .map(|(l, link)| link_travel_time(s, link, flows.link_flow[l]))
            .collect();
        let settled = !iterate || next.iter().zip(&passenger_time).all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
        let repeated = seen.iter().any(|x| x == &flows.link_flow);
        if settled || repeated || rounds >= opts.max_rounds {
            let tol = if opts.build.integer { 0.0 } else { 1e-6 };
            let check = check_assignment(s, catalog, &model.space, &assignment, opts.build.integer, tol);
            let cost = total_system_cost(s, catalog, &assignment, &flows);
            return Ok(RunResult {
                principle,
                model,
                solution,
                assignment,
                flows,
                cost,
                check,
                passenger_time,
                rounds,
                settled,
            });
        }
        seen.push(flows.link_flow.clone());
        passenger_time = next;
        previous = Some(solution.x);
    }
}
