//! Inference routines for the linear and quadratic tracking objectives.

pub mod dp;
pub mod lp;
pub mod quadratic;
pub mod simplex;
pub mod ssp;

pub use dp::{dp_onepass, dp_twopass};
pub use lp::{lp_relax_solve, round_euclidean, round_underestimator, LpSolution};
pub use quadratic::{greedy_dp_quadratic, twopass_dp_quadratic};
pub use ssp::{ssp_solve, ssp_solve_with_trace};

use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::potentials::{flow_cost, CostedGraph};

/// Inference method for the quadratic objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMethod {
    GreedyDp,
    TwopassDp,
    LpRound,
}

/// A solved quadratic instance: the integral flow, its full quadratic
/// objective under the original costs, and the LP lower bound when the
/// method produced one.
#[derive(Debug, Clone)]
pub struct QuadSolution {
    pub flow: FlowSolution,
    pub final_cost: f64,
    pub lower_bound: Option<f64>,
}

impl QuadSolution {
    /// Relative relaxation gap, zero when both sides are zero.
    pub fn gap(&self) -> Option<f64> {
        let lb = self.lower_bound?;
        if lb == 0.0 && self.final_cost == 0.0 {
            return Some(0.0);
        }
        Some((self.final_cost - lb) / lb.abs())
    }
}

/// Runs the chosen quadratic solver. For `LpRound` both rounding
/// heuristics run on the relaxed solution and the cheaper flow wins
/// (the Euclidean rounding on exact ties).
pub fn solve_quadratic(cg: &CostedGraph, method: QuadMethod) -> Result<QuadSolution> {
    match method {
        QuadMethod::GreedyDp => {
            let flow = greedy_dp_quadratic(cg);
            let final_cost = flow.objective;
            Ok(QuadSolution {
                flow,
                final_cost,
                lower_bound: None,
            })
        }
        QuadMethod::TwopassDp => {
            let flow = twopass_dp_quadratic(cg);
            let final_cost = flow.objective;
            Ok(QuadSolution {
                flow,
                final_cost,
                lower_bound: None,
            })
        }
        QuadMethod::LpRound => {
            let lp = lp_relax_solve(cg)?;
            let euclid = round_euclidean(cg, &lp);
            let under = round_underestimator(cg, &lp);
            let c_e = flow_cost(cg, &euclid)?;
            let c_u = flow_cost(cg, &under)?;
            let (mut flow, final_cost) = if c_u < c_e { (under, c_u) } else { (euclid, c_e) };
            flow.objective = final_cost;
            Ok(QuadSolution {
                flow,
                final_cost,
                lower_bound: Some(lp.objective),
            })
        }
    }
}

/// Solver selector exposed on the command line and in benchmark
/// reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackMethod {
    /// Exact successive shortest paths, linear objective.
    Ssp,
    /// One-pass DP, linear objective.
    Dp1,
    /// Two-pass DP, linear objective.
    Dp2,
    /// Greedy DP with pairwise cost updates, quadratic objective.
    Dp1q,
    /// Two-pass DP with pairwise cost updates, quadratic objective.
    Dp2q,
    /// LP relaxation plus rounding, quadratic objective.
    Lp,
}

impl TrackMethod {
    pub const ALL: [TrackMethod; 6] = [
        TrackMethod::Ssp,
        TrackMethod::Dp1,
        TrackMethod::Dp2,
        TrackMethod::Dp1q,
        TrackMethod::Dp2q,
        TrackMethod::Lp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrackMethod::Ssp => "ssp",
            TrackMethod::Dp1 => "dp1",
            TrackMethod::Dp2 => "dp2",
            TrackMethod::Dp1q => "dp1q",
            TrackMethod::Dp2q => "dp2q",
            TrackMethod::Lp => "lp",
        }
    }

    /// Runs the method, reporting the quadratic objective of the result
    /// so runs are comparable across linear and quadratic solvers.
    pub fn run(&self, cg: &CostedGraph) -> Result<QuadSolution> {
        let from_linear = |flow: FlowSolution| -> Result<QuadSolution> {
            let final_cost = flow_cost(cg, &flow)?;
            Ok(QuadSolution {
                flow,
                final_cost,
                lower_bound: None,
            })
        };
        match self {
            TrackMethod::Ssp => from_linear(ssp_solve(cg)),
            TrackMethod::Dp1 => from_linear(dp_onepass(cg)),
            TrackMethod::Dp2 => from_linear(dp_twopass(cg)),
            TrackMethod::Dp1q => solve_quadratic(cg, QuadMethod::GreedyDp),
            TrackMethod::Dp2q => solve_quadratic(cg, QuadMethod::TwopassDp),
            TrackMethod::Lp => solve_quadratic(cg, QuadMethod::LpRound),
        }
    }
}

impl std::str::FromStr for TrackMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrackMethod::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown method '{s}', expected one of ssp|dp1|dp2|dp1q|dp2q|lp")))
    }
}
