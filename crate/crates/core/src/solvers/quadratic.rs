//! Greedy solvers for the quadratic objective: repeated shortest-path
//! extraction with pairwise cost updates after every accepted track.

use crate::flow::FlowSolution;
use crate::potentials::{flow_cost_unchecked, CostedGraph};
use crate::solvers::dp::{Step, TwoPassEngine};

/// Sentinel detection cost for removed nodes; large but finite so
/// partner updates keep the arithmetic well-defined.
const DELETED: f64 = 1e12;

/// For every ordered pair index, the index of its mirror (j, i).
fn reverse_pairs(cg: &CostedGraph) -> Vec<usize> {
    use std::collections::HashMap;
    let mut by_endpoints = HashMap::with_capacity(cg.graph.pairs.len());
    for (idx, p) in cg.graph.pairs.iter().enumerate() {
        by_endpoints.insert((p.i, p.j), idx);
    }
    cg.graph
        .pairs
        .iter()
        .map(|p| by_endpoints[&(p.j, p.i)])
        .collect()
}

/// Adds (or with `sign` -1 removes) the pairwise cost detection `x`
/// imposes on its same-frame partners.
fn update_partners(cg: &CostedGraph, rev: &[usize], costs: &mut [f64], x: usize, sign: f64) {
    for &p in cg.graph.pairs_of(x) {
        let pair = &cg.graph.pairs[p];
        costs[pair.j] += sign * (cg.q[p] + cg.q[rev[p]]);
    }
}

/// One forward DP sweep per round over the remaining DAG; every
/// accepted track adds its quadratic interaction onto the unary costs
/// of its same-frame partners and removes its own nodes. Cost-to-go
/// caching is unsound here because those updates invalidate it, so the
/// sweep always runs over the whole remaining graph.
///
/// The reported objective is the full quadratic cost of the final flow
/// under the original, un-updated costs.
pub fn greedy_dp_quadratic(cg: &CostedGraph) -> FlowSolution {
    let n = cg.graph.num_detections();
    let rev = reverse_pairs(cg);
    let mut working = cg.c_det.clone();
    let mut alive = vec![true; n];
    let mut flow = FlowSolution::zeros(&cg.graph);

    for _round in 0..=n {
        let mut cost = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let mut best = cg.c_birth[i];
            let mut best_pred = None;
            for &e in cg.graph.in_edges(i) {
                let src = cg.graph.edges[e].src;
                if !alive[src] {
                    continue;
                }
                let cand = cost[src] + cg.c_trans[e];
                if cand < best {
                    best = cand;
                    best_pred = Some(e);
                }
            }
            cost[i] = working[i] + best;
            pred[i] = best_pred;
        }

        let mut end: Option<usize> = None;
        let mut end_cost = 0.0;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let total = cost[i] + cg.c_death[i];
            if end.is_none() || total < end_cost {
                end = Some(i);
                end_cost = total;
            }
        }
        let Some(end) = end else { break };
        if end_cost >= 0.0 {
            break;
        }

        flow.death[end] = true;
        let mut path = Vec::new();
        let mut cur = end;
        loop {
            path.push(cur);
            flow.det[cur] = true;
            match pred[cur] {
                Some(e) => {
                    flow.trans[e] = true;
                    cur = cg.graph.edges[e].src;
                }
                None => {
                    flow.birth[cur] = true;
                    break;
                }
            }
        }
        for &x in &path {
            update_partners(cg, &rev, &mut working, x, 1.0);
            working[x] = DELETED;
            alive[x] = false;
        }
    }

    flow.objective = flow_cost_unchecked(cg, &flow);
    debug_assert!(flow.check_conservation(&cg.graph).is_ok());
    flow
}

/// Two-pass residual DP with pairwise cost updates: each accepted path
/// may activate new detections (their interaction is added onto
/// partners) and deactivate previously instanced ones (their
/// interaction is removed).
pub fn twopass_dp_quadratic(cg: &CostedGraph) -> FlowSolution {
    let n = cg.graph.num_detections();
    let rev = reverse_pairs(cg);
    let mut engine = TwoPassEngine::new(cg);

    for _round in 0..=n {
        let Some(path) = engine.find_path() else { break };
        if path.cost >= 0.0 {
            break;
        }
        for &s in &path.steps {
            match s {
                Step::DetOn(x) => update_partners(cg, &rev, &mut engine.det_cost, x, 1.0),
                Step::DetOff(x) => update_partners(cg, &rev, &mut engine.det_cost, x, -1.0),
                _ => {}
            }
        }
        engine.apply(&path);
    }

    let mut flow = engine.flow;
    flow.objective = flow_cost_unchecked(cg, &flow);
    debug_assert!(flow.check_conservation(&cg.graph).is_ok());
    flow
}
