//! Successive shortest paths: the exact solver for the linear
//! objective.
//!
//! Every detection splits into an in-node and an out-node joined by a
//! unit-capacity arc carrying the detection cost; birth arcs leave the
//! source, death arcs enter the sink and transition arcs connect
//! out-nodes to later in-nodes. Tracks are augmented one at a time
//! along the cheapest source-to-sink path of the residual graph while
//! that path has negative cost.
//!
//! Arc costs can be negative, so Dijkstra runs on reduced costs with
//! Johnson-style node potentials. The initial potentials come from one
//! relaxation sweep in topological order (the initial graph is a DAG);
//! after each augmentation potentials grow by the clamped Dijkstra
//! distances, which keeps all residual reduced costs nonnegative.

use crate::flow::FlowSolution;
use crate::potentials::{linear_cost, CostedGraph};

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cost: f64,
    /// Unit capacity left on this arc.
    avail: bool,
}

struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

const SOURCE: usize = 0;
const SINK: usize = 1;

fn in_node(i: usize) -> usize {
    2 + 2 * i
}

fn out_node(i: usize) -> usize {
    3 + 2 * i
}

impl Network {
    fn add(&mut self, from: usize, to: usize, cost: f64) {
        let id = self.arcs.len();
        self.arcs.push(Arc {
            to,
            cost,
            avail: true,
        });
        self.arcs.push(Arc {
            to: from,
            cost: -cost,
            avail: false,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
    }

    fn num_nodes(&self) -> usize {
        self.adj.len()
    }
}

/// Heap entry ordered by distance, ties by node index for determinism.
#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact optimum of the linear objective (quadratic terms ignored).
pub fn ssp_solve(cg: &CostedGraph) -> FlowSolution {
    ssp_solve_with_trace(cg).0
}

/// Like [`ssp_solve`], also returning the real cost of every accepted
/// augmenting path in order.
pub fn ssp_solve_with_trace(cg: &CostedGraph) -> (FlowSolution, Vec<f64>) {
    let n = cg.graph.num_detections();
    let mut net = build_network(cg);
    let nodes = net.num_nodes();

    // Initial potentials: shortest distance from the source over the
    // DAG, relaxed in topological node order.
    let mut pot = vec![f64::INFINITY; nodes];
    pot[SOURCE] = 0.0;
    let topo_order: Vec<usize> = std::iter::once(SOURCE)
        .chain((0..n).flat_map(|i| [in_node(i), out_node(i)]))
        .chain(std::iter::once(SINK))
        .collect();
    for &x in &topo_order {
        if pot[x].is_finite() {
            for &a in &net.adj[x] {
                let arc = net.arcs[a];
                if arc.avail && pot[x] + arc.cost < pot[arc.to] {
                    pot[arc.to] = pot[x] + arc.cost;
                }
            }
        }
    }
    // Every node is reachable through birth/detection/death arcs.
    debug_assert!(pot.iter().all(|p| p.is_finite()));

    let mut path_costs = Vec::new();
    for _ in 0..=n {
        // Dijkstra on reduced costs from the source.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut parent: Vec<Option<usize>> = vec![None; nodes];
        let mut done = vec![false; nodes];
        let mut heap = std::collections::BinaryHeap::new();
        dist[SOURCE] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            node: SOURCE,
        });
        while let Some(HeapEntry { dist: d, node: x }) = heap.pop() {
            if done[x] {
                continue;
            }
            done[x] = true;
            if d > dist[x] {
                continue;
            }
            for &a in &net.adj[x] {
                let arc = net.arcs[a];
                if !arc.avail {
                    continue;
                }
                let rc = (arc.cost + pot[x] - pot[arc.to]).max(0.0);
                let nd = d + rc;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    parent[arc.to] = Some(a);
                    heap.push(HeapEntry {
                        dist: nd,
                        node: arc.to,
                    });
                }
            }
        }

        if !dist[SINK].is_finite() {
            break;
        }
        let real_cost = dist[SINK] + pot[SINK];
        if real_cost >= 0.0 {
            break;
        }
        path_costs.push(real_cost);

        // Augment along the parent chain.
        let mut x = SINK;
        while x != SOURCE {
            let a = parent[x].expect("sink reachable implies a full chain");
            net.arcs[a].avail = false;
            net.arcs[a ^ 1].avail = true;
            x = net.arcs[a ^ 1].to;
        }

        // Potential update, clamped at the sink distance so that arcs
        // into unexplored territory keep nonnegative reduced costs.
        let d_sink = dist[SINK];
        for (p, d) in pot.iter_mut().zip(&dist) {
            *p += d.min(d_sink);
        }
    }

    // Read the flow off the saturated forward arcs.
    let mut flow = FlowSolution::zeros(&cg.graph);
    for i in 0..n {
        flow.birth[i] = !net.arcs[2 * i].avail;
        flow.det[i] = !net.arcs[2 * (n + i)].avail;
        flow.death[i] = !net.arcs[2 * (2 * n + i)].avail;
    }
    for e in 0..cg.graph.edges.len() {
        flow.trans[e] = !net.arcs[2 * (3 * n + e)].avail;
    }
    flow.objective = linear_cost(cg, &flow);
    debug_assert!(flow.check_conservation(&cg.graph).is_ok());
    (flow, path_costs)
}

/// Arc ids have a fixed layout: birth i -> 2i, detection i -> 2(n+i),
/// death i -> 2(2n+i), transition e -> 2(3n+e). Odd ids are the paired
/// reverse arcs.
fn build_network(cg: &CostedGraph) -> Network {
    let n = cg.graph.num_detections();
    let mut net = Network {
        arcs: Vec::with_capacity(2 * (3 * n + cg.graph.edges.len())),
        adj: vec![Vec::new(); 2 + 2 * n],
    };
    for i in 0..n {
        net.add(SOURCE, in_node(i), cg.c_birth[i]);
    }
    for i in 0..n {
        net.add(in_node(i), out_node(i), cg.c_det[i]);
    }
    for i in 0..n {
        net.add(out_node(i), SINK, cg.c_death[i]);
    }
    for (e, edge) in cg.graph.edges.iter().enumerate() {
        net.add(out_node(edge.src), in_node(edge.dst), cg.c_trans[e]);
    }
    net
}
