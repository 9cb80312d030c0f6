//! LP relaxation of the quadratic objective and its rounding
//! heuristics.
//!
//! The quadratic products f_i f_j are replaced by auxiliary variables
//! u_ij constrained by u <= f_i, u <= f_j and f_i + f_j <= u + 1, which
//! pin u to the product at binary points. Only pairs with a nonzero
//! quadratic coefficient get an auxiliary variable; all others are
//! implied.

use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::potentials::CostedGraph;
use crate::solvers::simplex::{self, LpProblem, LpRow, Rel, SimplexStatus};
use crate::solvers::ssp::ssp_solve;

/// Constraint satisfaction tolerance for returned relaxations.
pub const LP_FEAS_TOL: f64 = 1e-7;
/// A value within this of 0 or 1 counts as integral.
pub const LP_INT_TOL: f64 = 1e-6;

/// A (possibly fractional) solution of the relaxed program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub det: Vec<f64>,
    pub trans: Vec<f64>,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    /// Relaxed pair products, parallel to `graph.pairs`. Pairs without
    /// an instantiated auxiliary variable carry min(f_i, f_j), which
    /// satisfies the same constraints.
    pub pair_u: Vec<f64>,
    /// Objective of the relaxation: a lower bound on the integral
    /// optimum.
    pub objective: f64,
    /// All variables within [`LP_INT_TOL`] of {0, 1}.
    pub integral: bool,
}

struct VarMap {
    n: usize,
    m: usize,
    /// Column of the auxiliary variable per pair index, usize::MAX if
    /// not instantiated.
    u_col: Vec<usize>,
    total: usize,
}

impl VarMap {
    fn new(cg: &CostedGraph) -> Self {
        let n = cg.graph.num_detections();
        let m = cg.graph.edges.len();
        let mut next = 3 * n + m;
        let u_col = cg
            .q
            .iter()
            .map(|&q| {
                if q != 0.0 {
                    let c = next;
                    next += 1;
                    c
                } else {
                    usize::MAX
                }
            })
            .collect();
        VarMap {
            n,
            m,
            u_col,
            total: next,
        }
    }

    fn det(&self, i: usize) -> usize {
        i
    }

    fn trans(&self, e: usize) -> usize {
        self.n + e
    }

    fn birth(&self, i: usize) -> usize {
        self.n + self.m + i
    }

    fn death(&self, i: usize) -> usize {
        2 * self.n + self.m + i
    }
}

/// Solves the LP relaxation. The zero flow is always feasible, so
/// failure to find a feasible point is an internal error; an exhausted
/// pivot budget surfaces as a solver error carrying the status.
pub fn lp_relax_solve(cg: &CostedGraph) -> Result<LpSolution> {
    let graph = &cg.graph;
    let vars = VarMap::new(cg);

    let mut objective = vec![0.0; vars.total];
    let mut upper = vec![1.0; vars.total];
    for i in 0..vars.n {
        objective[vars.det(i)] = cg.c_det[i];
        objective[vars.birth(i)] = cg.c_birth[i];
        objective[vars.death(i)] = cg.c_death[i];
    }
    for e in 0..vars.m {
        objective[vars.trans(e)] = cg.c_trans[e];
    }
    for (p, &col) in vars.u_col.iter().enumerate() {
        if col != usize::MAX {
            objective[col] = cg.q[p];
            upper[col] = 1.0;
        }
    }

    let mut rows = Vec::with_capacity(2 * vars.n + 3 * graph.pairs.len());
    for i in 0..vars.n {
        let mut inflow = vec![(vars.birth(i), 1.0), (vars.det(i), -1.0)];
        for &e in graph.in_edges(i) {
            inflow.push((vars.trans(e), 1.0));
        }
        rows.push(LpRow {
            coeffs: inflow,
            rel: Rel::Eq,
            rhs: 0.0,
        });
        let mut outflow = vec![(vars.death(i), 1.0), (vars.det(i), -1.0)];
        for &e in graph.out_edges(i) {
            outflow.push((vars.trans(e), 1.0));
        }
        rows.push(LpRow {
            coeffs: outflow,
            rel: Rel::Eq,
            rhs: 0.0,
        });
    }
    for (p, pair) in graph.pairs.iter().enumerate() {
        let col = vars.u_col[p];
        if col == usize::MAX {
            continue;
        }
        let (fi, fj) = (vars.det(pair.i), vars.det(pair.j));
        rows.push(LpRow {
            coeffs: vec![(col, 1.0), (fi, -1.0)],
            rel: Rel::Le,
            rhs: 0.0,
        });
        rows.push(LpRow {
            coeffs: vec![(col, 1.0), (fj, -1.0)],
            rel: Rel::Le,
            rhs: 0.0,
        });
        rows.push(LpRow {
            coeffs: vec![(fi, 1.0), (fj, 1.0), (col, -1.0)],
            rel: Rel::Le,
            rhs: 1.0,
        });
    }

    let lp = LpProblem {
        num_vars: vars.total,
        objective,
        upper,
        rows,
    };
    let sol = simplex::solve(&lp)?;
    if sol.status == SimplexStatus::IterationLimit {
        return Err(Error::Solver(
            "simplex pivot budget exhausted on the relaxation".into(),
        ));
    }

    let det: Vec<f64> = (0..vars.n).map(|i| sol.x[vars.det(i)]).collect();
    let trans: Vec<f64> = (0..vars.m).map(|e| sol.x[vars.trans(e)]).collect();
    let birth: Vec<f64> = (0..vars.n).map(|i| sol.x[vars.birth(i)]).collect();
    let death: Vec<f64> = (0..vars.n).map(|i| sol.x[vars.death(i)]).collect();
    let pair_u: Vec<f64> = graph
        .pairs
        .iter()
        .enumerate()
        .map(|(p, pair)| {
            let col = vars.u_col[p];
            if col == usize::MAX {
                det[pair.i].min(det[pair.j])
            } else {
                sol.x[col]
            }
        })
        .collect();

    // Validate the returned basis against every constraint.
    for i in 0..vars.n {
        let inflow: f64 = birth[i]
            + graph
                .in_edges(i)
                .iter()
                .map(|&e| trans[e])
                .sum::<f64>();
        let outflow: f64 = death[i]
            + graph
                .out_edges(i)
                .iter()
                .map(|&e| trans[e])
                .sum::<f64>();
        if (inflow - det[i]).abs() > LP_FEAS_TOL || (outflow - det[i]).abs() > LP_FEAS_TOL {
            return Err(Error::Solver(format!(
                "relaxation violates conservation at detection {i}"
            )));
        }
    }
    for (p, pair) in graph.pairs.iter().enumerate() {
        let u = pair_u[p];
        let (fi, fj) = (det[pair.i], det[pair.j]);
        if u > fi + LP_FEAS_TOL || u > fj + LP_FEAS_TOL || fi + fj > u + 1.0 + LP_FEAS_TOL {
            return Err(Error::Solver(format!(
                "relaxation violates pair constraints at pair {p}"
            )));
        }
    }

    let integral = det
        .iter()
        .chain(&trans)
        .chain(&birth)
        .chain(&death)
        .chain(&pair_u)
        .all(|&v| v < LP_INT_TOL || (v - 1.0).abs() < LP_INT_TOL);

    Ok(LpSolution {
        det,
        trans,
        birth,
        death,
        pair_u,
        objective: sol.objective,
        integral,
    })
}

/// Euclidean rounding: the nearest integral flow to the fractional
/// solution. Minimizing ||f - f_hat||^2 over binary feasible flows
/// reduces to a linear objective with per-variable cost 1 - 2 f_hat,
/// solved exactly by successive shortest paths.
pub fn round_euclidean(cg: &CostedGraph, lp: &LpSolution) -> FlowSolution {
    let mut rounded = cg.clone();
    rounded.q.fill(0.0);
    for (c, &f) in rounded.c_det.iter_mut().zip(&lp.det) {
        *c = 1.0 - 2.0 * f;
    }
    for (c, &f) in rounded.c_trans.iter_mut().zip(&lp.trans) {
        *c = 1.0 - 2.0 * f;
    }
    for (c, &f) in rounded.c_birth.iter_mut().zip(&lp.birth) {
        *c = 1.0 - 2.0 * f;
    }
    for (c, &f) in rounded.c_death.iter_mut().zip(&lp.death) {
        *c = 1.0 - 2.0 * f;
    }
    ssp_solve(&rounded)
}

/// Rounding via a linear under-estimator: unary costs absorb the
/// quadratic terms weighted by the relaxed pair values (both
/// orientations), and the resulting linear program is solved exactly.
pub fn round_underestimator(cg: &CostedGraph, lp: &LpSolution) -> FlowSolution {
    let mut linear = cg.clone();
    linear.q.fill(0.0);
    for (p, pair) in cg.graph.pairs.iter().enumerate() {
        linear.c_det[pair.i] += cg.q[p] * lp.pair_u[p];
        linear.c_det[pair.j] += cg.q[p] * lp.pair_u[p];
    }
    ssp_solve(&linear)
}
