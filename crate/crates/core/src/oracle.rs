//! Brute-force ground truth for desk-scale instances: enumerate every
//! feasible flow of a small graph and return the exact optimum of the
//! full quadratic objective.

use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::graph::TrackingGraph;
use crate::potentials::{flow_cost_unchecked, CostedGraph};

/// Hard cap on the instance size the enumerator accepts.
pub const ORACLE_MAX_DETECTIONS: usize = 14;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_flow: FlowSolution,
    pub best_cost: f64,
    pub num_feasible: usize,
}

/// Depth-first choice per detection, in frame order: leave it unused,
/// start a new track at it, or continue a chosen predecessor whose
/// outgoing slot is still free. Every feasible flow is visited exactly
/// once.
struct Enumerator<'a> {
    graph: &'a TrackingGraph,
    flow: FlowSolution,
    /// Active detections whose outgoing slot is still unassigned.
    open_tail: Vec<bool>,
}

impl<'a> Enumerator<'a> {
    fn new(graph: &'a TrackingGraph) -> Self {
        Enumerator {
            graph,
            flow: FlowSolution::zeros(graph),
            open_tail: vec![false; graph.num_detections()],
        }
    }

    fn run(&mut self, visit: &mut impl FnMut(&FlowSolution)) {
        self.recurse(0, visit);
    }

    fn recurse(&mut self, i: usize, visit: &mut impl FnMut(&FlowSolution)) {
        let n = self.graph.num_detections();
        if i == n {
            // Close every open tail with a death; all sits are final.
            for t in 0..n {
                if self.open_tail[t] {
                    self.flow.death[t] = true;
                }
            }
            visit(&self.flow);
            for t in 0..n {
                if self.open_tail[t] {
                    self.flow.death[t] = false;
                }
            }
            return;
        }

        // Unused.
        self.recurse(i + 1, visit);

        // Track start.
        self.flow.det[i] = true;
        self.flow.birth[i] = true;
        self.open_tail[i] = true;
        self.recurse(i + 1, visit);
        self.open_tail[i] = false;
        self.flow.birth[i] = false;

        // Continuation of an active predecessor with a free tail.
        for &e in self.graph.in_edges(i) {
            let src = self.graph.edges[e].src;
            if self.open_tail[src] {
                self.open_tail[src] = false;
                self.flow.trans[e] = true;
                self.open_tail[i] = true;
                self.recurse(i + 1, visit);
                self.open_tail[i] = false;
                self.flow.trans[e] = false;
                self.open_tail[src] = true;
            }
        }
        self.flow.det[i] = false;
    }
}

fn check_guard(graph: &TrackingGraph) -> Result<()> {
    let n = graph.num_detections();
    if n > ORACLE_MAX_DETECTIONS {
        return Err(Error::OracleGuard(n, ORACLE_MAX_DETECTIONS));
    }
    Ok(())
}

/// Calls `visit` once per feasible integral flow. The visited reference
/// is reused between calls; clone it to keep a flow.
pub fn for_each_flow(
    graph: &TrackingGraph,
    mut visit: impl FnMut(&FlowSolution),
) -> Result<()> {
    check_guard(graph)?;
    Enumerator::new(graph).run(&mut visit);
    Ok(())
}

/// All feasible flows of a small graph, materialized.
pub fn enumerate_flows(graph: &TrackingGraph) -> Result<Vec<FlowSolution>> {
    let mut out = Vec::new();
    for_each_flow(graph, |f| out.push(f.clone()))?;
    Ok(out)
}

/// Exact minimizer of the quadratic objective over all feasible flows.
/// Ties break towards the lexicographically smallest flow vector.
pub fn brute_force_optimum(cg: &CostedGraph) -> Result<OracleResult> {
    let mut best: Option<FlowSolution> = None;
    let mut best_cost = f64::INFINITY;
    let mut count = 0usize;
    for_each_flow(&cg.graph, |f| {
        count += 1;
        let cost = flow_cost_unchecked(cg, f);
        let better = match &best {
            None => true,
            Some(b) => {
                cost < best_cost - 1e-15
                    || ((cost - best_cost).abs() <= 1e-15 && f.lex_key() < b.lex_key())
            }
        };
        if better {
            best_cost = cost;
            let mut f = f.clone();
            f.objective = cost;
            best = Some(f);
        }
    })?;
    Ok(OracleResult {
        best_flow: best.expect("the zero flow is always feasible"),
        best_cost,
        num_feasible: count,
    })
}

/// Independent count of feasible flows via memoized dynamic programming
/// over (position, open-tail set); used to cross-check the enumerator.
pub fn count_flows_dp(graph: &TrackingGraph) -> Result<usize> {
    check_guard(graph)?;
    use std::collections::HashMap;
    let n = graph.num_detections();
    // relevant[i]: detections that still have an edge into [i, n). Open
    // tails outside this set can never link again, so memo states that
    // differ only there are equivalent.
    let mut relevant = vec![0u32; n + 1];
    for i in (0..n).rev() {
        relevant[i] = relevant[i + 1];
        for &e in graph.in_edges(i) {
            relevant[i] |= 1 << graph.edges[e].src;
        }
    }
    fn go(
        graph: &TrackingGraph,
        relevant: &[u32],
        i: usize,
        open: u32,
        memo: &mut HashMap<(usize, u32), usize>,
    ) -> usize {
        if i == graph.num_detections() {
            return 1;
        }
        let key = (i, open & relevant[i]);
        if let Some(&c) = memo.get(&key) {
            return c;
        }
        let mut total = go(graph, relevant, i + 1, open, memo); // unused
        total += go(graph, relevant, i + 1, open | (1 << i), memo); // birth
        for &e in graph.in_edges(i) {
            let src = graph.edges[e].src;
            if open & (1 << src) != 0 {
                total += go(graph, relevant, i + 1, (open & !(1 << src)) | (1 << i), memo);
            }
        }
        memo.insert(key, total);
        total
    }
    let mut memo = HashMap::new();
    Ok(go(graph, &relevant, 0, 0, &mut memo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::graph::{Detection, TransitionEdge};
    use crate::instances::{random_costed_graph, RandomInstance};

    fn tiny_graph(n: usize, edges: &[(usize, usize)]) -> TrackingGraph {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let dets = (0..n)
            .map(|i| Detection::new(i as u64, i as u32, 0, b, 1.0))
            .collect();
        let edges = edges
            .iter()
            .map(|&(s, d)| TransitionEdge {
                src: s,
                dst: d,
                gap: (d - s) as u32,
                predicted_overlap: 1.0,
            })
            .collect();
        TrackingGraph::new(dets, edges, Vec::new(), 1, 8).unwrap()
    }

    #[test]
    fn empty_graph_has_one_flow() {
        let g = tiny_graph(0, &[]);
        assert_eq!(enumerate_flows(&g).unwrap().len(), 1);
    }

    #[test]
    fn single_detection_has_two_flows() {
        let g = tiny_graph(1, &[]);
        let flows = enumerate_flows(&g).unwrap();
        assert_eq!(flows.len(), 2);
    }

    #[test]
    fn linked_pair_has_five_flows() {
        // off/off, on 1st, on 2nd, both as separate tracks, both linked.
        let g = tiny_graph(2, &[(0, 1)]);
        let flows = enumerate_flows(&g).unwrap();
        assert_eq!(flows.len(), 5);
        for f in &flows {
            f.check_conservation(&g).unwrap();
        }
    }

    #[test]
    fn enumeration_matches_dp_count_on_random_graphs() {
        for seed in 0..30 {
            let cg = random_costed_graph(&RandomInstance {
                seed,
                num_frames: 4,
                max_per_frame: 3,
                edge_density: 0.6,
                quadratic: false,
                ..RandomInstance::default()
            });
            if cg.graph.num_detections() > 10 {
                continue;
            }
            let enumerated = enumerate_flows(&cg.graph).unwrap().len();
            let counted = count_flows_dp(&cg.graph).unwrap();
            assert_eq!(enumerated, counted, "seed {seed}");
        }
    }

    #[test]
    fn all_positive_costs_choose_zero_flow() {
        let g = tiny_graph(3, &[(0, 1), (1, 2)]);
        let mut cg = CostedGraph::zero_costs(g);
        cg.c_det = vec![1.0; 3];
        let res = brute_force_optimum(&cg).unwrap();
        assert_eq!(res.best_cost, 0.0);
        assert_eq!(res.best_flow.num_active(), 0);
    }

    #[test]
    fn guard_rejects_large_graphs() {
        let g = tiny_graph(15, &[]);
        assert!(matches!(
            enumerate_flows(&g),
            Err(Error::OracleGuard(15, _))
        ));
    }

    #[test]
    fn oracle_invariant_under_relabeling() {
        // Renaming detection ids (keeping structure) must not change the
        // optimal cost.
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let mk = |ids: [u64; 3]| {
            let dets = vec![
                Detection::new(ids[0], 0, 0, b, 1.0),
                Detection::new(ids[1], 1, 0, b, 1.0),
                Detection::new(ids[2], 2, 0, b, 1.0),
            ];
            let edges = vec![
                TransitionEdge { src: 0, dst: 1, gap: 1, predicted_overlap: 1.0 },
                TransitionEdge { src: 1, dst: 2, gap: 1, predicted_overlap: 1.0 },
            ];
            let g = TrackingGraph::new(dets, edges, Vec::new(), 1, 8).unwrap();
            let mut cg = CostedGraph::zero_costs(g);
            cg.c_det = vec![-1.0, 0.25, -0.8];
            cg.c_birth = vec![0.1; 3];
            cg.c_death = vec![0.1; 3];
            cg.c_trans = vec![-0.05, 0.3];
            cg
        };
        let a = brute_force_optimum(&mk([0, 1, 2])).unwrap();
        let b_ = brute_force_optimum(&mk([7, 12, 40])).unwrap();
        assert_eq!(a.best_cost, b_.best_cost);
        assert_eq!(a.num_feasible, b_.num_feasible);
    }
}
