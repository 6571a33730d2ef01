//! Bounded-variable simplex with primal and dual phases.
//!
//! Every row `a x` gets a logical variable `r = a x` whose bounds carry the
//! row sense, so the system reads `A x - r = 0` and all the right-hand side
//! information lives in variable bounds. The basis inverse is kept as a
//! dense matrix, updated by pivoting and rebuilt from scratch every
//! `refactor_every` pivots. Primal infeasibility is removed by a composite
//! phase one that minimizes the sum of bound violations of the basic
//! variables, which lets a solve start from any basis.
//!
//! When the starting basis is dual feasible, which is the usual case after
//! tightening bounds or appending rows to a solved program, a dual simplex
//! pass restores primal feasibility first. It typically needs a handful of
//! pivots where phase one would need many. The primal method then finishes
//! (or takes over when the dual pass stalls).

use std::time::Instant;

use serde::Serialize;

use crate::model::{MathProgram, Sense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpOptions {
    /// Bound violation accepted on basic variables.
    pub primal_tol: f64,
    /// Reduced-cost magnitude below which a column is not attractive.
    pub dual_tol: f64,
    /// Smallest pivot element accepted by the ratio test.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots after which Bland's rule takes over.
    pub degenerate_limit: usize,
    /// Run the dual pass when the starting basis allows it.
    pub dual: bool,
    /// Point in time after which a solve stops with an iteration limit.
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: 1_000_000,
            refactor_every: 300,
            degenerate_limit: 200,
            dual: true,
            deadline: None,
        }
    }
}

/// Outcome of one simplex run.
#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Values of the structural variables.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row prices `c_B B^-1` of the final basis.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    slot: Vec<Option<usize>>,
    binv: Vec<f64>,
    since_refactor: usize,
    opts: LpOptions,
}

fn row_bounds(sense: Sense, rhs: f64) -> (f64, f64) {
    match sense {
        Sense::Le => (f64::NEG_INFINITY, rhs),
        Sense::Ge => (rhs, f64::INFINITY),
        Sense::Eq => (rhs, rhs),
    }
}

fn start_value(lower: f64, upper: f64) -> f64 {
    if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

enum DualOutcome {
    Feasible,
    Infeasible,
    Limit,
    /// The pass gave up; the primal method continues from where it stopped.
    Stalled,
}

struct Ratio {
    pos: usize,
    step: f64,
    /// Value the leaving variable takes when it leaves the basis.
    bound: f64,
}

impl Simplex {
    /// Sets up the program with all rows' logical variables basic and every
    /// structural variable at a finite bound (or zero when free).
    pub fn new(p: &MathProgram, opts: LpOptions) -> Self {
        let n = p.num_vars();
        let m = p.num_rows();
        let mut cols = vec![Vec::new(); n];
        for (i, c) in p.constraints.iter().enumerate() {
            for &(j, a) in &c.terms {
                cols[j].push((i, a));
            }
        }
        let mut lower: Vec<f64> = p.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = p.variables.iter().map(|v| v.upper).collect();
        let mut cost = p.objective.clone();
        let mut x: Vec<f64> = (0..n).map(|j| start_value(lower[j], upper[j])).collect();
        for c in &p.constraints {
            let (lo, hi) = row_bounds(c.sense, c.rhs);
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
            x.push(0.0);
        }
        let mut slot = vec![None; n + m];
        for i in 0..m {
            slot[n + i] = Some(i);
        }
        let mut s = Simplex {
            n,
            cols,
            cost,
            lower,
            upper,
            x,
            basis: (n..n + m).collect(),
            slot,
            binv: Vec::new(),
            since_refactor: 0,
            opts,
        };
        s.slack_inverse();
        s.recompute_basics();
        s
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn slack_inverse(&mut self) {
        let m = self.m();
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot_column(&self, v: &[f64], j: usize) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| v[i] * a).sum()
        } else {
            -v[j - self.n]
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        for (i, a) in self.column(j) {
            for (k, o) in out.iter_mut().enumerate() {
                *o += self.binv[k * m + i] * a;
            }
        }
        out
    }

    fn recompute_basics(&mut self) {
        let m = self.m();
        let mut v = vec![0.0; m];
        for j in 0..self.x.len() {
            if self.slot[j].is_none() && self.x[j] != 0.0 {
                for (i, a) in self.column(j) {
                    v[i] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&v).map(|(b, vi)| b * vi).sum();
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination. A singular
    /// basis is replaced by the all-logical basis and `false` is returned.
    fn refactor(&mut self) -> bool {
        let m = self.m();
        self.since_refactor = 0;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (mut best, mut arg) = (0.0, c);
            for r in c..m {
                if a[r * m + c].abs() > best {
                    best = a[r * m + c].abs();
                    arg = r;
                }
            }
            if best < 1e-11 {
                self.reset_to_slack_basis();
                return false;
            }
            if arg != c {
                for k in 0..m {
                    a.swap(c * m + k, arg * m + k);
                    inv.swap(c * m + k, arg * m + k);
                }
            }
            let piv = a[c * m + c];
            // Columns left of `c` are already unit columns, so the pivot
            // row of `a` is zero there.
            let a_nz: Vec<usize> = (c..m).filter(|&k| a[c * m + k] != 0.0).collect();
            let inv_nz: Vec<usize> = (0..m).filter(|&k| inv[c * m + k] != 0.0).collect();
            for &k in &a_nz {
                a[c * m + k] /= piv;
            }
            for &k in &inv_nz {
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                let f = a[r * m + c];
                if r != c && f != 0.0 {
                    for &k in &a_nz {
                        a[r * m + k] -= f * a[c * m + k];
                    }
                    for &k in &inv_nz {
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basics();
        true
    }

    fn reset_to_slack_basis(&mut self) {
        let m = self.m();
        for &j in &self.basis {
            self.slot[j] = None;
            if j < self.n {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                self.x[j] = self.x[j].clamp(lo.min(hi), hi.max(lo));
                if !self.x[j].is_finite() {
                    self.x[j] = start_value(lo, hi);
                }
            }
        }
        self.basis = (self.n..self.n + m).collect();
        for (k, &j) in self.basis.iter().enumerate() {
            self.slot[j] = Some(k);
        }
        self.slack_inverse();
        self.recompute_basics();
    }

    /// Appends a row; its logical variable enters the basis.
    pub fn add_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) {
        let m = self.m();
        let i = m;
        let mut dense_row = vec![0.0; m];
        for &(j, a) in terms {
            self.cols[j].push((i, a));
            if let Some(k) = self.slot[j] {
                dense_row[k] += a;
            }
        }
        // New inverse: [[B^-1, 0], [r B^-1, -1]] with r the row restricted
        // to the basic columns.
        let mut binv = vec![0.0; (m + 1) * (m + 1)];
        for k in 0..m {
            binv[k * (m + 1)..k * (m + 1) + m].copy_from_slice(&self.binv[k * m..(k + 1) * m]);
        }
        for (k, &r) in dense_row.iter().enumerate() {
            if r != 0.0 {
                for c in 0..m {
                    binv[m * (m + 1) + c] += r * self.binv[k * m + c];
                }
            }
        }
        binv[m * (m + 1) + m] = -1.0;
        self.binv = binv;
        let (lo, hi) = row_bounds(sense, rhs);
        let activity: f64 = terms.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.lower.push(lo);
        self.upper.push(hi);
        self.cost.push(0.0);
        self.x.push(activity);
        self.slot.push(Some(m));
        self.basis.push(self.n + m);
    }

    /// Changes the bounds of a structural variable. A nonbasic variable is
    /// moved into its new range.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.slot[j].is_none() {
            let v = self.x[j].max(lower).min(upper);
            if v != self.x[j] {
                let delta = v - self.x[j];
                self.x[j] = v;
                let alpha = self.ftran(j);
                for (k, a) in alpha.iter().enumerate() {
                    self.x[self.basis[k]] -= a * delta;
                }
            }
        }
    }

    /// Reduced costs of the structural variables under row prices `duals`.
    pub fn reduced_costs(&self, duals: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| self.cost[j] - self.dot_column(duals, j)).collect()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn num_rows(&self) -> usize {
        self.m()
    }

    fn ratio_test(&self, alpha: &[f64], sigma: f64, phase_one: bool, bland: bool) -> Option<Ratio> {
        let tol = self.opts.primal_tol;
        // Limit for basic position k: (step, bound hit) with bounds relaxed by `relax`.
        let limit = |k: usize, relax: f64| -> Option<(f64, f64)> {
            let delta = -sigma * alpha[k];
            if delta.abs() <= self.opts.pivot_tol {
                return None;
            }
            let b = self.basis[k];
            let (xb, lb, ub) = (self.x[b], self.lower[b], self.upper[b]);
            if delta > 0.0 {
                if phase_one && xb < lb - tol {
                    Some(((lb + relax - xb) / delta, lb))
                } else if phase_one && xb > ub + tol {
                    None
                } else if ub.is_finite() {
                    Some(((ub + relax - xb) / delta, ub))
                } else {
                    None
                }
            } else if phase_one && xb > ub + tol {
                Some(((xb - ub + relax) / -delta, ub))
            } else if phase_one && xb < lb - tol {
                None
            } else if lb.is_finite() {
                Some(((xb - lb + relax) / -delta, lb))
            } else {
                None
            }
        };
        let m = self.m();
        if bland {
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for k in 0..m {
                if let Some((t, bound)) = limit(k, 0.0) {
                    let t = t.max(0.0);
                    let key = self.basis[k];
                    let better = match best {
                        None => true,
                        Some((bt, _, bkey, _)) => t < bt - 1e-12 || (t <= bt + 1e-12 && key < bkey),
                    };
                    if better {
                        best = Some((t, k, key, bound));
                    }
                }
            }
            return best.map(|(step, pos, _, bound)| Ratio { pos, step, bound });
        }
        let mut theta = f64::INFINITY;
        for k in 0..m {
            if let Some((t, _)) = limit(k, tol) {
                theta = theta.min(t);
            }
        }
        if !theta.is_finite() {
            return None;
        }
        let mut best: Option<Ratio> = None;
        let mut best_pivot = 0.0;
        for k in 0..m {
            if let Some((t, bound)) = limit(k, 0.0) {
                if t <= theta && alpha[k].abs() > best_pivot {
                    best_pivot = alpha[k].abs();
                    best = Some(Ratio {
                        pos: k,
                        step: t.max(0.0),
                        bound,
                    });
                }
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m();
        let piv = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= piv;
        }
        let pivot_row = self.binv[r * m..(r + 1) * m].to_vec();
        let nonzeros: Vec<usize> = (0..m).filter(|&c| pivot_row[c] != 0.0).collect();
        let dense = nonzeros.len() * 4 > m;
        for (k, &f) in alpha.iter().enumerate() {
            if k == r || f == 0.0 {
                continue;
            }
            let row = &mut self.binv[k * m..(k + 1) * m];
            if dense {
                for (v, &p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            } else {
                for &c in &nonzeros {
                    row[c] -= f * pivot_row[c];
                }
            }
        }
        self.since_refactor += 1;
    }

    fn out_of_budget(&self, iterations: usize) -> bool {
        iterations >= self.opts.max_iterations || self.opts.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// `c_B B^-1` for the phase-two costs.
    fn prices(&self) -> Vec<f64> {
        let m = self.m();
        let mut pi = vec![0.0; m];
        for (k, &b) in self.basis.iter().enumerate() {
            let c = self.cost[b];
            if c != 0.0 {
                for (p, &v) in pi.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *p += c * v;
                }
            }
        }
        pi
    }

    /// Moves every boxed nonbasic variable to the bound its reduced cost
    /// points at. Returns `false`, changing nothing, when some reduced cost
    /// points at an infinite bound.
    fn make_dual_feasible(&mut self) -> bool {
        let pi = self.prices();
        let tol = self.opts.dual_tol;
        let mut moves = Vec::new();
        for j in 0..self.x.len() {
            if self.slot[j].is_some() || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - self.dot_column(&pi, j);
            let target = if d > tol {
                self.lower[j]
            } else if d < -tol {
                self.upper[j]
            } else {
                continue;
            };
            if !target.is_finite() {
                return false;
            }
            if target != self.x[j] {
                moves.push((j, target));
            }
        }
        if !moves.is_empty() {
            for (j, v) in moves {
                self.x[j] = v;
            }
            self.recompute_basics();
        }
        true
    }

    /// Dual simplex on a dual feasible basis until the basic variables are
    /// within their bounds.
    fn dual_pass(&mut self, iterations: &mut usize) -> DualOutcome {
        let tol = self.opts.primal_tol;
        let budget = *iterations + 20 * self.m() + 1000;
        loop {
            if self.out_of_budget(*iterations) {
                return DualOutcome::Limit;
            }
            if *iterations >= budget {
                return DualOutcome::Stalled;
            }
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return DualOutcome::Stalled;
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            for (k, &b) in self.basis.iter().enumerate() {
                let (v, lo, hi) = (self.x[b], self.lower[b], self.upper[b]);
                let (excess, target) = if v < lo - tol {
                    (lo - v, lo)
                } else if v > hi + tol {
                    (v - hi, hi)
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, e, _)| excess > e) {
                    leave = Some((k, excess, target));
                }
            }
            let Some((r, _, target)) = leave else {
                return DualOutcome::Feasible;
            };
            let m = self.m();
            let below = self.x[self.basis[r]] < target;
            let pi = self.prices();
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            // Candidates: (column, row entry, reduced cost magnitude).
            let mut candidates = Vec::new();
            let mut theta = f64::INFINITY;
            for j in 0..self.x.len() {
                if self.slot[j].is_some() || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.dot_column(&rho, j);
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                // Direction of x_j that moves the leaving variable towards
                // its violated bound.
                let dir = if below { -a.signum() } else { a.signum() };
                let movable = if dir > 0.0 {
                    self.x[j] < self.upper[j] - tol
                } else {
                    self.x[j] > self.lower[j] + tol
                };
                if !movable {
                    continue;
                }
                let d = dir * (self.cost[j] - self.dot_column(&pi, j));
                theta = theta.min((d.max(0.0) + self.opts.dual_tol) / a.abs());
                candidates.push((j, a, d.max(0.0)));
            }
            if candidates.is_empty() {
                return DualOutcome::Infeasible;
            }
            let Some(&(q, _, _)) = candidates
                .iter()
                .filter(|&&(_, a, d)| d / a.abs() <= theta)
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then_with(|| y.0.cmp(&x.0)))
            else {
                return DualOutcome::Stalled;
            };
            let alpha = self.ftran(q);
            if alpha[r].abs() <= self.opts.pivot_tol {
                return DualOutcome::Stalled;
            }
            let leaving = self.basis[r];
            let dx = (self.x[leaving] - target) / alpha[r];
            self.x[q] += dx;
            for (k, a) in alpha.iter().enumerate() {
                self.x[self.basis[k]] -= a * dx;
            }
            self.x[leaving] = target;
            self.pivot(r, &alpha);
            self.slot[leaving] = None;
            self.basis[r] = q;
            self.slot[q] = Some(r);
            *iterations += 1;
        }
    }

    /// Runs the simplex method from the current basis.
    pub fn solve(&mut self) -> LpResult {
        let m = self.m();
        let tol = self.opts.primal_tol;
        let mut iterations = 0;
        self.recompute_basics();
        for j in 0..self.n {
            if self.lower[j] > self.upper[j] + tol {
                return self.finish(LpStatus::Infeasible, vec![0.0; m], iterations);
            }
        }
        if self.opts.dual && self.make_dual_feasible() {
            match self.dual_pass(&mut iterations) {
                DualOutcome::Infeasible => return self.finish(LpStatus::Infeasible, vec![0.0; m], iterations),
                DualOutcome::Limit => return self.finish(LpStatus::IterationLimit, vec![0.0; m], iterations),
                DualOutcome::Feasible | DualOutcome::Stalled => {}
            }
        }
        self.primal(iterations)
    }

    fn primal(&mut self, mut iterations: usize) -> LpResult {
        let m = self.m();
        let total = self.x.len();
        let tol = self.opts.primal_tol;
        let mut degenerate = 0;
        let mut bland = false;
        loop {
            if self.out_of_budget(iterations) {
                return self.finish(LpStatus::IterationLimit, vec![0.0; m], iterations);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor();
            }
            let mut cb = vec![0.0; m];
            let mut phase_one = false;
            for (k, &b) in self.basis.iter().enumerate() {
                if self.x[b] < self.lower[b] - tol {
                    cb[k] = -1.0;
                    phase_one = true;
                } else if self.x[b] > self.upper[b] + tol {
                    cb[k] = 1.0;
                    phase_one = true;
                }
            }
            if !phase_one {
                for (k, &b) in self.basis.iter().enumerate() {
                    cb[k] = self.cost[b];
                }
            }
            let mut pi = vec![0.0; m];
            for (k, &c) in cb.iter().enumerate() {
                if c != 0.0 {
                    for (p, &b) in pi.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                        *p += c * b;
                    }
                }
            }
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                if self.slot[j].is_some() {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(&pi, j);
                let sigma = if d < -self.opts.dual_tol && self.x[j] < self.upper[j] - tol {
                    1.0
                } else if d > self.opts.dual_tol && self.x[j] > self.lower[j] + tol {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, sigma, d));
                    break;
                }
                if entering.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                    entering = Some((j, sigma, d));
                }
            }
            let Some((j, sigma, _)) = entering else {
                let status = if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
                return self.finish(status, pi, iterations);
            };
            iterations += 1;
            let alpha = self.ftran(j);
            let flip = if sigma > 0.0 {
                self.upper[j] - self.x[j]
            } else {
                self.x[j] - self.lower[j]
            };
            let ratio = self.ratio_test(&alpha, sigma, phase_one, bland);
            let step = match &ratio {
                Some(r) => r.step.min(flip),
                None => flip,
            };
            if !step.is_finite() {
                if phase_one {
                    // Numerical trouble: rebuild the basis and try again.
                    self.reset_to_slack_basis();
                    bland = true;
                    continue;
                }
                return self.finish(LpStatus::Unbounded, pi, iterations);
            }
            if step <= 1e-12 {
                degenerate += 1;
                if degenerate > self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.x[j] += sigma * step;
            for (k, a) in alpha.iter().enumerate() {
                self.x[self.basis[k]] -= sigma * a * step;
            }
            match ratio {
                Some(r) if r.step < flip => {
                    let leaving = self.basis[r.pos];
                    self.x[leaving] = r.bound;
                    self.pivot(r.pos, &alpha);
                    self.slot[leaving] = None;
                    self.basis[r.pos] = j;
                    self.slot[j] = Some(r.pos);
                }
                _ => {
                    self.x[j] = if sigma > 0.0 { self.upper[j] } else { self.lower[j] };
                }
            }
        }
    }

    fn finish(&mut self, status: LpStatus, duals: Vec<f64>, iterations: usize) -> LpResult {
        LpResult {
            status,
            x: self.x[..self.n].to_vec(),
            objective: self.objective(),
            duals,
            iterations,
        }
    }
}

/// Solves the continuous relaxation of `p` (integrality flags are ignored).
pub fn solve_lp(p: &MathProgram) -> LpResult {
    Simplex::new(p, LpOptions::default()).solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::program::{ConstraintFamily, VarFamily};

    fn program(vars: &[(f64, f64, f64)], rows: &[(&[(usize, f64)], Sense, f64)]) -> MathProgram {
        let mut p = MathProgram::new("t");
        for (k, &(lo, hi, c)) in vars.iter().enumerate() {
            let j = p.add_var(format!("x{k}"), lo, hi, false, VarFamily::Generic);
            p.objective[j] = c;
        }
        for (k, (terms, sense, rhs)) in rows.iter().enumerate() {
            p.add_row(format!("r{k}"), terms.to_vec(), *sense, *rhs, vec![ConstraintFamily::Generic]);
        }
        p
    }

    #[test]
    fn one_variable() {
        let p = program(&[(f64::NEG_INFINITY, f64::INFINITY, 1.0)], &[
            (&[(0, 1.0)], Sense::Ge, 3.0),
            (&[(0, 1.0)], Sense::Le, 10.0),
        ]);
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-9);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds() {
        let p = program(&[(2.0, 1.0, 1.0)], &[]);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
        let p = program(&[(0.0, 5.0, 1.0)], &[(&[(0, 1.0)], Sense::Ge, 6.0)]);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let p = program(&[(0.0, f64::INFINITY, -1.0), (0.0, 1.0, 0.0)], &[(
            &[(0, 1.0), (1, -1.0)],
            Sense::Ge,
            0.0,
        )]);
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn small_production_plan() {
        // max 3a + 5b s.t. a <= 4, 2b <= 12, 3a + 2b <= 18.
        let p = program(&[(0.0, f64::INFINITY, -3.0), (0.0, f64::INFINITY, -5.0)], &[
            (&[(0, 1.0)], Sense::Le, 4.0),
            (&[(1, 2.0)], Sense::Le, 12.0),
            (&[(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
        ]);
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 36.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn rows_added_after_a_solve() {
        let p = program(&[(0.0, 10.0, -1.0), (0.0, 10.0, -1.0)], &[(&[(0, 1.0), (1, 1.0)], Sense::Le, 8.0)]);
        let mut s = Simplex::new(&p, LpOptions::default());
        assert!((s.solve().objective + 8.0).abs() < 1e-9);
        s.add_row(&[(0, 1.0), (1, 2.0)], Sense::Le, 10.0);
        s.add_row(&[(0, 1.0)], Sense::Le, 5.0);
        let r = s.solve();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 7.5).abs() < 1e-9, "{r:?}");
        s.set_bounds(1, 3.0, 10.0);
        let r = s.solve();
        assert!((r.objective + 7.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn equality_system() {
        let p = program(&[(0.0, 10.0, 1.0), (0.0, 10.0, 2.0), (0.0, 10.0, 3.0)], &[
            (&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 6.0),
            (&[(0, 1.0), (1, -1.0)], Sense::Eq, 0.0),
            (&[(2, 1.0)], Sense::Ge, 1.0),
        ]);
        let r = solve_lp(&p);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - (2.5 + 5.0 + 3.0)).abs() < 1e-9, "{r:?}");
    }
}
