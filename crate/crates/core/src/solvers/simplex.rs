//! A self-contained bounded-variable primal simplex with a dense
//! tableau, two phases and Bland's rule as the anti-cycling fallback.
//!
//! Variables have lower bound 0 and individual upper bounds (possibly
//! infinite). Rows are <=, >= or = with arbitrary right-hand sides.
//! This is sized for desk-scale relaxations (a few thousand variables),
//! not production LPs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// min c'x  s.t. rows, 0 <= x <= upper.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    /// Pivot budget exhausted; the solution is the best feasible basis
    /// reached.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SimplexStatus,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    /// B^-1 A for every column, dense, row-major.
    t: Vec<Vec<f64>>,
    /// Current basic variable values, one per row.
    xb: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// Reduced costs for the current cost vector.
    d: Vec<f64>,
    degenerate_streak: usize,
    pivots: usize,
}

impl Tableau {
    fn num_cols(&self) -> usize {
        self.cost.len()
    }

    fn var_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::Basic(r) => self.xb[r],
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
        }
    }

    /// Recomputes reduced costs from scratch for the current cost
    /// vector: d = c - c_B' B^-1 A.
    fn reset_reduced_costs(&mut self) {
        let cols = self.num_cols();
        let mut d = self.cost.clone();
        for r in 0..self.basis.len() {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..cols {
                    d[j] -= cb * self.t[r][j];
                }
            }
        }
        for r in 0..self.basis.len() {
            d[self.basis[r]] = 0.0;
        }
        self.d = d;
    }

    fn pick_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (col, dir, score)
        for j in 0..self.num_cols() {
            let dir = match self.status[j] {
                VarStatus::Basic(_) => continue,
                VarStatus::AtLower => {
                    if self.d[j] < -PIVOT_TOL {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarStatus::AtUpper => {
                    if self.d[j] > PIVOT_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            if self.upper[j] - self.lower[j] <= 0.0 {
                continue; // fixed variable, cannot move
            }
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// One simplex iteration. Returns false at optimality.
    fn step(&mut self) -> Result<bool> {
        let bland = self.degenerate_streak >= BLAND_TRIGGER;
        let Some((q, dir)) = self.pick_entering(bland) else {
            return Ok(false);
        };

        // Ratio test: how far can x_q move before a basic variable or
        // x_q itself hits a bound?
        let mut t_limit = self.upper[q] - self.lower[q];
        let mut leave: Option<(usize, VarStatus)> = None; // (row, exit status)
        for r in 0..self.basis.len() {
            let a = self.t[r][q] * dir;
            if a > PIVOT_TOL {
                let slack = self.xb[r] - self.lower[self.basis[r]];
                let lim = slack.max(0.0) / a;
                if lim < t_limit - PIVOT_TOL
                    || (lim < t_limit + PIVOT_TOL
                        && leave.map_or(true, |(lr, _)| self.basis[r] < self.basis[lr]))
                {
                    t_limit = lim.min(t_limit);
                    leave = Some((r, VarStatus::AtLower));
                }
            } else if a < -PIVOT_TOL {
                let ub = self.upper[self.basis[r]];
                if !ub.is_finite() {
                    continue;
                }
                let slack = ub - self.xb[r];
                let lim = slack.max(0.0) / (-a);
                if lim < t_limit - PIVOT_TOL
                    || (lim < t_limit + PIVOT_TOL
                        && leave.map_or(true, |(lr, _)| self.basis[r] < self.basis[lr]))
                {
                    t_limit = lim.min(t_limit);
                    leave = Some((r, VarStatus::AtUpper));
                }
            }
        }

        if !t_limit.is_finite() {
            return Err(Error::Solver("LP is unbounded".into()));
        }
        if t_limit > 1e-12 {
            self.degenerate_streak = 0;
        } else {
            self.degenerate_streak += 1;
        }

        // Move the entering variable and update basic values. The move
        // direction was chosen against the reduced cost, so the
        // objective never increases across pivots.
        let delta = dir * t_limit;
        debug_assert!(self.d[q] * delta <= 1e-12);
        if delta != 0.0 {
            for r in 0..self.basis.len() {
                self.xb[r] -= self.t[r][q] * delta;
            }
        }

        match leave {
            None => {
                // Bound flip, no basis change.
                self.status[q] = match self.status[q] {
                    VarStatus::AtLower => VarStatus::AtUpper,
                    VarStatus::AtUpper => VarStatus::AtLower,
                    VarStatus::Basic(_) => unreachable!(),
                };
            }
            Some((r, exit_status)) => {
                let entering_value = match self.status[q] {
                    VarStatus::AtLower => self.lower[q] + delta,
                    VarStatus::AtUpper => self.upper[q] + delta,
                    VarStatus::Basic(_) => unreachable!(),
                };
                let old = self.basis[r];
                self.status[old] = exit_status;
                // Snap the leaving variable exactly onto its bound.
                self.xb[r] = entering_value;
                self.basis[r] = q;
                self.status[q] = VarStatus::Basic(r);

                // Pivot the tableau on (r, q).
                let piv = self.t[r][q];
                debug_assert!(piv.abs() > PIVOT_TOL / 10.0);
                let inv = 1.0 / piv;
                for v in self.t[r].iter_mut() {
                    *v *= inv;
                }
                let row_r = std::mem::take(&mut self.t[r]);
                for (rr, row) in self.t.iter_mut().enumerate() {
                    if rr == r {
                        continue;
                    }
                    let f = row[q];
                    if f != 0.0 {
                        for (v, rv) in row.iter_mut().zip(&row_r) {
                            *v -= f * rv;
                        }
                        row[q] = 0.0;
                    }
                }
                let f = self.d[q];
                if f != 0.0 {
                    for (v, rv) in self.d.iter_mut().zip(&row_r) {
                        *v -= f * rv;
                    }
                    self.d[q] = 0.0;
                }
                self.t[r] = row_r;
            }
        }
        self.pivots += 1;
        Ok(true)
    }

    fn run(&mut self, max_pivots: usize) -> Result<SimplexStatus> {
        while self.pivots < max_pivots {
            if !self.step()? {
                return Ok(SimplexStatus::Optimal);
            }
        }
        Ok(SimplexStatus::IterationLimit)
    }
}

/// Solves the LP. Errors on inconsistent input, unboundedness or
/// phase-1 infeasibility; an exhausted pivot budget is reported in the
/// status with the best feasible point found.
pub fn solve(lp: &LpProblem) -> Result<SimplexSolution> {
    let n = lp.num_vars;
    if lp.objective.len() != n || lp.upper.len() != n {
        return Err(Error::Solver("objective/bounds length mismatch".into()));
    }
    let m = lp.rows.len();

    // Column layout: structural | slacks (Le/Ge) | artificials.
    let num_slacks = lp
        .rows
        .iter()
        .filter(|r| r.rel != Rel::Eq)
        .count();
    let mut cols = n + num_slacks;
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack_col_of_row = vec![usize::MAX; m];
    let mut next_slack = n;
    for (i, row) in lp.rows.iter().enumerate() {
        let mut a = vec![0.0; cols];
        for &(j, v) in &row.coeffs {
            if j >= n {
                return Err(Error::Solver("row references unknown variable".into()));
            }
            a[j] += v;
        }
        let mut b = row.rhs;
        let mut rel = row.rel;
        // Normalize to nonnegative rhs.
        if b < 0.0 {
            for v in a.iter_mut() {
                *v = -*v;
            }
            b = -b;
            rel = match rel {
                Rel::Le => Rel::Ge,
                Rel::Ge => Rel::Le,
                Rel::Eq => Rel::Eq,
            };
        }
        match rel {
            Rel::Le => {
                a[next_slack] = 1.0;
                slack_col_of_row[i] = next_slack;
                next_slack += 1;
            }
            Rel::Ge => {
                a[next_slack] = -1.0;
                next_slack += 1;
            }
            Rel::Eq => {}
        }
        dense.push(a);
        rhs.push(b);
    }

    // Basis: the slack on Le rows, an artificial elsewhere.
    let mut basis = Vec::with_capacity(m);
    let mut artificial_cols = Vec::new();
    for (i, row) in dense.iter_mut().enumerate() {
        let s = slack_col_of_row[i];
        if s != usize::MAX && row[s] == 1.0 {
            basis.push(s);
        } else {
            basis.push(usize::MAX); // placeholder, artificial assigned below
            artificial_cols.push(i);
        }
    }
    let num_art = artificial_cols.len();
    cols += num_art;
    for row in dense.iter_mut() {
        row.resize(cols, 0.0);
    }
    for (k, &i) in artificial_cols.iter().enumerate() {
        let col = n + num_slacks + k;
        dense[i][col] = 1.0;
        basis[i] = col;
    }

    if let Some(j) = lp.upper.iter().position(|&u| u < 0.0) {
        return Err(Error::Solver(format!("variable {j} has a negative upper bound")));
    }
    let lower = vec![0.0; cols];
    let mut upper = vec![f64::INFINITY; cols];
    upper[..n].copy_from_slice(&lp.upper);

    let mut status = vec![VarStatus::AtLower; cols];
    for (r, &b) in basis.iter().enumerate() {
        status[b] = VarStatus::Basic(r);
    }

    let mut tab = Tableau {
        t: dense,
        xb: rhs,
        basis,
        status,
        lower,
        upper,
        cost: vec![0.0; cols],
        d: vec![0.0; cols],
        degenerate_streak: 0,
        pivots: 0,
    };

    let max_pivots = 20_000 + 60 * (m + cols);

    // Phase 1: minimize the artificial total if any artificial starts
    // off nonzero.
    let art_range = n + num_slacks..cols;
    let needs_phase1 = tab
        .basis
        .iter()
        .enumerate()
        .any(|(r, &b)| art_range.contains(&b) && tab.xb[r] > FEAS_TOL);
    if needs_phase1 {
        for j in art_range.clone() {
            tab.cost[j] = 1.0;
        }
        tab.reset_reduced_costs();
        tab.run(max_pivots)?;
        let art_total: f64 = art_range
            .clone()
            .map(|j| tab.var_value(j))
            .sum();
        if art_total > FEAS_TOL {
            return Err(Error::Solver("LP is infeasible".into()));
        }
        for j in art_range.clone() {
            tab.cost[j] = 0.0;
        }
    }
    // Pin artificials so phase 2 cannot reuse them.
    for j in art_range {
        tab.upper[j] = 0.0;
    }

    // Phase 2.
    tab.cost[..n].copy_from_slice(&lp.objective);
    tab.reset_reduced_costs();
    tab.degenerate_streak = 0;
    let status = tab.run(max_pivots)?;

    let mut x = vec![0.0; n];
    for (j, v) in x.iter_mut().enumerate() {
        *v = tab.var_value(j).clamp(0.0, lp.upper[j].max(0.0));
    }
    let objective = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(SimplexSolution {
        x,
        objective,
        status,
    })
}
