//! Branch-and-bound over LP relaxations with lazy epigraph cuts.
//!
//! Nodes are explored best-bound first, ties broken by creation order.
//! After a node branches, its down child is processed immediately
//! (plunging) so incumbents appear early.
//!
//! The default branching rule picks the most fractional integer variable,
//! lowest index first among ties. The pseudo-cost rule instead uses the
//! average objective increase per unit of rounding observed so far when
//! each variable was branched down or up, and picks the candidate with the
//! largest product of its two estimated increases. Variables without
//! history borrow the average of those that have one.
//!
//! Once an incumbent exists, every node also fixes integer variables by
//! reduced cost: a nonbasic variable whose reduced cost is `d` cannot move
//! more than `(incumbent - node bound) / d` away from its bound in any
//! improving solution below the node, so its range shrinks accordingly for
//! the whole subtree.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use super::lp::{LpOptions, LpStatus, Simplex};
use super::{relative_gap, BranchingRule, SolveError, SolveStatus, Solution, SolverOptions};
use crate::model::{MathProgram, Sense};

#[derive(Clone, Debug)]
struct Node {
    id: usize,
    /// Bound inherited from the parent relaxation.
    bound: f64,
    /// Bound tightenings from the root, applied in order.
    changes: Vec<(usize, f64, f64)>,
    /// The branching that created the node, for pseudo-cost updates.
    origin: Option<Branching>,
}

#[derive(Clone, Copy, Debug)]
struct Branching {
    /// Position in the integer list.
    var: usize,
    up: bool,
    /// Distance the branching moved the variable's value.
    distance: f64,
    parent_objective: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that the max-heap pops the smallest (bound, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

enum NodeResult {
    Solved {
        x: Vec<f64>,
        objective: f64,
        reduced_costs: Vec<f64>,
    },
    Infeasible,
    Unbounded,
    IterationLimit,
}

struct Search<'a> {
    p: &'a MathProgram,
    opts: &'a SolverOptions,
    lp: Simplex,
    integers: Vec<usize>,
    applied: Vec<(f64, f64)>,
    cut_keys: HashSet<(usize, u64, u64)>,
    cuts: usize,
    lp_iterations: usize,
    /// Per integer variable: summed unit increases and counts, down then up.
    pseudo_sum: Vec<[f64; 2]>,
    pseudo_count: Vec<[usize; 2]>,
}

impl Search<'_> {
    fn apply(&mut self, changes: &[(usize, f64, f64)]) {
        let mut target: Vec<(f64, f64)> = self
            .integers
            .iter()
            .map(|&j| (self.p.variables[j].lower, self.p.variables[j].upper))
            .collect();
        for &(k, lo, hi) in changes {
            target[k] = (lo, hi);
        }
        for (k, &t) in target.iter().enumerate() {
            if self.applied[k] != t {
                self.lp.set_bounds(self.integers[k], t.0, t.1);
                self.applied[k] = t;
            }
        }
    }

    /// Solves the current relaxation, separating epigraph cuts until every
    /// epigraph value matches its function or the round budget runs out.
    fn relax(&mut self) -> NodeResult {
        let mut rounds = 0;
        loop {
            let r = self.lp.solve();
            self.lp_iterations += r.iterations;
            match r.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return NodeResult::Infeasible,
                LpStatus::Unbounded => return NodeResult::Unbounded,
                LpStatus::IterationLimit => return NodeResult::IterationLimit,
            }
            let mut added = 0;
            if rounds < self.opts.cut_rounds {
                for (e_idx, e) in self.p.epigraphs.iter().enumerate() {
                    let arg = r.x[e.argument];
                    let f = e.function.eval(arg);
                    if f - r.x[e.value] <= 1e-9 * f.abs().max(1.0) {
                        continue;
                    }
                    let cut = e.function.support(arg);
                    if !self
                        .cut_keys
                        .insert((e_idx, cut.slope.to_bits(), cut.intercept.to_bits()))
                    {
                        continue;
                    }
                    self.lp
                        .add_row(&[(e.value, 1.0), (e.argument, -cut.slope)], Sense::Ge, cut.intercept);
                    added += 1;
                }
            }
            self.cuts += added;
            rounds += 1;
            if added == 0 {
                return NodeResult::Solved {
                    objective: r.objective + self.p.objective_offset,
                    reduced_costs: self.lp.reduced_costs(&r.duals),
                    x: r.x,
                };
            }
        }
    }

    /// Bound changes implied by the reduced costs of a node whose
    /// relaxation is `slack` below the incumbent.
    fn fixings(&self, x: &[f64], reduced_costs: &[f64], slack: f64) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for (k, &j) in self.integers.iter().enumerate() {
            let (lo, hi) = self.applied[k];
            let d = reduced_costs[j];
            if lo == hi || d.abs() <= self.opts.lp.dual_tol {
                continue;
            }
            let reach = (slack / d.abs() + 1e-9).floor();
            if d > 0.0 && (x[j] - lo).abs() <= self.opts.int_tol && lo + reach < hi {
                out.push((k, lo, lo + reach));
            } else if d < 0.0 && (x[j] - hi).abs() <= self.opts.int_tol && hi - reach > lo {
                out.push((k, hi - reach, hi));
            }
        }
        out
    }

    fn record(&mut self, b: Branching, objective: f64) {
        let side = usize::from(b.up);
        self.pseudo_sum[b.var][side] += (objective - b.parent_objective).max(0.0) / b.distance;
        self.pseudo_count[b.var][side] += 1;
    }

    /// Integer variable to branch on, as a position in `integers`, with the
    /// fractional part of its value.
    fn branching_candidate(&self, x: &[f64]) -> Option<(usize, f64)> {
        if self.opts.branching == BranchingRule::MostFractional {
            let mut best: Option<(usize, f64, f64)> = None;
            for (k, &j) in self.integers.iter().enumerate() {
                let frac = x[j] - x[j].floor();
                let dist = frac.min(1.0 - frac);
                if dist > self.opts.int_tol && best.is_none_or(|(_, _, d)| dist > d + 1e-12) {
                    best = Some((k, frac, dist));
                }
            }
            return best.map(|b| (b.0, b.1));
        }
        let mut mean = [1.0; 2];
        for (side, m) in mean.iter_mut().enumerate() {
            let (sum, count) = self
                .pseudo_sum
                .iter()
                .zip(&self.pseudo_count)
                .filter(|(_, c)| c[side] > 0)
                .fold((0.0, 0), |(s, n), (p, c)| (s + p[side] / c[side] as f64, n + 1));
            if count > 0 && sum > 0.0 {
                *m = sum / count as f64;
            }
        }
        let estimate = |k: usize, side: usize| {
            let c = self.pseudo_count[k][side];
            if c > 0 {
                self.pseudo_sum[k][side] / c as f64
            } else {
                mean[side]
            }
        };
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for (k, &j) in self.integers.iter().enumerate() {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist <= self.opts.int_tol {
                continue;
            }
            let score = (estimate(k, 0) * frac).max(1e-6) * (estimate(k, 1) * (1.0 - frac)).max(1e-6);
            let better = match best {
                None => true,
                Some((_, _, s, d)) => score > s * (1.0 + 1e-9) || (score >= s * (1.0 - 1e-9) && dist > d + 1e-12),
            };
            if better {
                best = Some((k, frac, score, dist));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Rounds integer variables and sets epigraph values to their exact
    /// function values. Returns the point and its exact objective when it
    /// satisfies every row.
    fn polish(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut y = x.to_vec();
        for &j in &self.integers {
            y[j] = y[j].round();
        }
        for e in &self.p.epigraphs {
            y[e.value] = e.function.eval(y[e.argument]);
        }
        let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if self.p.max_violation(&y) > self.opts.feas_tol.max(1e-9 * scale) * 10.0 {
            return None;
        }
        let objective = self.p.objective_value(&y);
        Some((y, objective))
    }
}

fn validate(opts: &SolverOptions) -> Result<(), SolveError> {
    for (name, v) in [
        ("gap_tol", opts.gap_tol),
        ("feas_tol", opts.feas_tol),
        ("int_tol", opts.int_tol),
    ] {
        if !(v > 0.0) {
            return Err(SolveError::Options(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Minimizes `p`, honouring integrality flags and epigraph terms.
pub fn solve(p: &MathProgram, opts: &SolverOptions) -> Result<Solution, SolveError> {
    solve_from(p, opts, None)
}

/// Like [`solve`], with a known point that becomes the first incumbent when
/// it is feasible after rounding its integer variables.
pub fn solve_from(p: &MathProgram, opts: &SolverOptions, initial: Option<&[f64]>) -> Result<Solution, SolveError> {
    validate(opts)?;
    if !p.bilinear.is_empty() {
        return Err(SolveError::Bilinear(p.bilinear.len()));
    }
    let start = Instant::now();
    let integers: Vec<usize> = (0..p.num_vars()).filter(|&j| p.variables[j].integer).collect();
    let applied = integers
        .iter()
        .map(|&j| (p.variables[j].lower, p.variables[j].upper))
        .collect();
    let mut search = Search {
        p,
        opts,
        lp: Simplex::new(
            p,
            LpOptions {
                deadline: opts.time_limit.map(|t| start + t),
                ..opts.lp.clone()
            },
        ),
        integers,
        applied,
        cut_keys: HashSet::new(),
        cuts: 0,
        lp_iterations: 0,
        pseudo_sum: vec![[0.0; 2]; p.num_vars()],
        pseudo_count: vec![[0; 2]; p.num_vars()],
    };
    let mut sol = Solution {
        status: SolveStatus::Limit,
        x: Vec::new(),
        objective: f64::INFINITY,
        bound: f64::NEG_INFINITY,
        gap: f64::INFINITY,
        nodes: 0,
        lp_iterations: 0,
        cuts: 0,
        root_bound: f64::NEG_INFINITY,
        incumbents: Vec::new(),
        wall_time: Default::default(),
    };
    if let Some((y, value)) = initial.filter(|x| x.len() == p.num_vars()).and_then(|x| search.polish(x)) {
        sol.objective = value;
        sol.x = y;
        sol.incumbents.push(value);
    }
    let mut heap = BinaryHeap::new();
    let mut plunge = Some(Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        changes: Vec::new(),
        origin: None,
    });
    let mut next_id = 1;
    let mut stopped_at: Option<f64> = None;
    let mut unbounded = false;

    while let Some(node) = plunge.take().or_else(|| heap.pop()) {
        if sol.has_incumbent() && relative_gap(sol.objective, node.bound) <= opts.gap_tol {
            continue;
        }
        let out_of_time = opts.time_limit.is_some_and(|t| start.elapsed() >= t);
        let out_of_nodes = opts.node_limit.is_some_and(|n| sol.nodes >= n);
        if out_of_time || out_of_nodes {
            stopped_at = Some(node.bound);
            heap.push(node);
            break;
        }
        sol.nodes += 1;
        search.apply(&node.changes);
        let (x, objective, reduced_costs) = match search.relax() {
            NodeResult::Solved {
                x,
                objective,
                reduced_costs,
            } => (x, objective, reduced_costs),
            NodeResult::Infeasible => continue,
            NodeResult::Unbounded => {
                unbounded = true;
                break;
            }
            NodeResult::IterationLimit => {
                stopped_at = Some(node.bound);
                heap.push(node);
                break;
            }
        };
        if node.id == 0 {
            sol.root_bound = objective;
        }
        if let Some(b) = node.origin {
            search.record(b, objective);
        }
        if sol.has_incumbent() && relative_gap(sol.objective, objective) <= opts.gap_tol {
            continue;
        }
        match search.branching_candidate(&x) {
            None => {
                if let Some((y, value)) = search.polish(&x) {
                    if value < sol.objective {
                        sol.objective = value;
                        sol.x = y;
                        sol.incumbents.push(value);
                    }
                }
            }
            Some((k, frac)) => {
                let j = search.integers[k];
                let (lo, hi) = search.applied[k];
                let mut changes = node.changes;
                if sol.has_incumbent() {
                    changes.extend(search.fixings(&x, &reduced_costs, sol.objective - objective));
                }
                let mut down = changes.clone();
                down.push((k, lo, x[j].floor()));
                let mut up = changes;
                up.push((k, x[j].ceil(), hi));
                let origin = |up: bool| Branching {
                    var: k,
                    up,
                    distance: if up { 1.0 - frac } else { frac },
                    parent_objective: objective,
                };
                plunge = Some(Node {
                    id: next_id,
                    bound: objective,
                    changes: down,
                    origin: Some(origin(false)),
                });
                heap.push(Node {
                    id: next_id + 1,
                    bound: objective,
                    changes: up,
                    origin: Some(origin(true)),
                });
                next_id += 2;
            }
        }
    }

    sol.cuts = search.cuts;
    sol.lp_iterations = search.lp_iterations;
    sol.wall_time = start.elapsed();
    if unbounded {
        sol.status = SolveStatus::Unbounded;
        sol.x.clear();
        sol.objective = f64::NEG_INFINITY;
        return Ok(sol);
    }
    let open_bound = heap
        .iter()
        .map(|n| n.bound)
        .chain(stopped_at)
        .fold(f64::INFINITY, f64::min);
    if sol.has_incumbent() {
        sol.bound = open_bound.min(sol.objective);
        sol.gap = relative_gap(sol.objective, sol.bound);
        sol.status = if stopped_at.is_none() || sol.gap <= opts.gap_tol {
            SolveStatus::Optimal
        } else {
            SolveStatus::Feasible
        };
    } else if stopped_at.is_some() {
        sol.status = SolveStatus::Limit;
        sol.bound = open_bound;
    } else {
        sol.status = SolveStatus::Infeasible;
        sol.bound = f64::INFINITY;
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::program::{ConstraintFamily, VarFamily};

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8.
        let mut p = MathProgram::new("k");
        let v: Vec<usize> = (0..3)
            .map(|k| p.add_var(format!("v{k}"), 0.0, 10.0, true, VarFamily::Generic))
            .collect();
        for (j, c) in v.iter().zip([-5.0, -4.0, -3.0]) {
            p.objective[*j] = c;
        }
        let g = vec![ConstraintFamily::Generic];
        p.add_row("a", vec![(0, 2.0), (1, 3.0), (2, 1.0)], Sense::Le, 5.0, g.clone());
        p.add_row("b", vec![(0, 4.0), (1, 1.0), (2, 2.0)], Sense::Le, 11.0, g.clone());
        p.add_row("c", vec![(0, 3.0), (1, 4.0), (2, 2.0)], Sense::Le, 8.0, g);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, -13.0);
        assert!(s.root_bound <= s.objective + 1e-9);
        assert!(s.incumbents.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_integer_program() {
        let mut p = MathProgram::new("i");
        let x = p.add_var("x", 0.0, 10.0, true, VarFamily::Generic);
        let g = vec![ConstraintFamily::Generic];
        p.add_row("a", vec![(x, 2.0)], Sense::Eq, 3.0, g);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_limit_or_feasible() {
        let mut p = MathProgram::new("l");
        let x = p.add_var("x", 0.0, 10.0, true, VarFamily::Generic);
        let y = p.add_var("y", 0.0, 10.0, true, VarFamily::Generic);
        p.objective[x] = -1.0;
        p.objective[y] = -1.0;
        let g = vec![ConstraintFamily::Generic];
        p.add_row("a", vec![(x, 2.0), (y, 2.0)], Sense::Le, 9.0, g);
        let opts = SolverOptions {
            node_limit: Some(1),
            ..Default::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!(matches!(s.status, SolveStatus::Limit | SolveStatus::Feasible));
    }
}
