//! Seeded random desk-scale instances for solver tests and benchmarks.
//!
//! These bypass the feature/weight machinery and draw costs directly,
//! which is what the solver correctness checks want: arbitrary signs,
//! no structure to hide behind.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{FlowSolution, Track};
use crate::geometry::BBox;
use crate::graph::{Detection, PairwisePair, TrackingGraph, TransitionEdge, RELATION_DIM};
use crate::potentials::CostedGraph;

/// Knobs for [`random_costed_graph`]. Costs are uniform in the given
/// ranges; `quadratic` adds mixed-sign q on every ordered same-frame
/// pair.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub num_frames: usize,
    /// Detections per frame are drawn from 1..=max_per_frame.
    pub max_per_frame: usize,
    /// Probability of a candidate edge (gaps 1 and 2) being present.
    pub edge_density: f64,
    pub quadratic: bool,
    pub det_cost: (f64, f64),
    pub trans_cost: (f64, f64),
    pub endpoint_cost: (f64, f64),
    pub q_range: (f64, f64),
}

impl Default for RandomInstance {
    fn default() -> Self {
        RandomInstance {
            seed: 0,
            num_frames: 4,
            max_per_frame: 3,
            edge_density: 0.6,
            quadratic: false,
            det_cost: (-2.0, 1.0),
            trans_cost: (-0.5, 0.5),
            endpoint_cost: (0.0, 0.6),
            q_range: (-1.5, 1.5),
        }
    }
}

pub fn random_costed_graph(cfg: &RandomInstance) -> CostedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dets = Vec::new();
    let mut id = 0u64;
    for frame in 0..cfg.num_frames {
        let count = rng.gen_range(1..=cfg.max_per_frame);
        for _ in 0..count {
            let x = rng.gen_range(0.0..200.0);
            let y = rng.gen_range(0.0..200.0);
            let w = rng.gen_range(10.0..40.0);
            let h = rng.gen_range(10.0..40.0);
            dets.push(Detection::new(
                id,
                frame as u32,
                0,
                BBox::new(x, y, x + w, y + h),
                rng.gen_range(-1.0..3.0),
            ));
            id += 1;
        }
    }

    let mut edges = Vec::new();
    for i in 0..dets.len() {
        for j in i + 1..dets.len() {
            let gap = dets[j].frame - dets[i].frame;
            if gap == 0 || gap > 2 {
                continue;
            }
            if rng.gen_bool(cfg.edge_density) {
                edges.push(TransitionEdge {
                    src: i,
                    dst: j,
                    gap,
                    predicted_overlap: rng.gen_range(0.0..1.0),
                });
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 0..dets.len() {
        for j in 0..dets.len() {
            if i != j && dets[i].frame == dets[j].frame {
                let mut relation = vec![0.0; RELATION_DIM];
                relation[rng.gen_range(0..RELATION_DIM - 1)] = 1.0;
                if rng.gen_bool(0.3) {
                    relation[RELATION_DIM - 1] = 1.0;
                }
                pairs.push(PairwisePair { i, j, relation });
            }
        }
    }

    let graph = TrackingGraph::new(dets, edges, pairs, 1, RELATION_DIM)
        .expect("generated instance is structurally valid");

    let n = graph.num_detections();
    let m = graph.edges.len();
    let p = graph.pairs.len();
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| rng.gen_range(lo..hi);
    let c_det = (0..n).map(|_| draw(&mut rng, cfg.det_cost)).collect();
    let c_trans = (0..m).map(|_| draw(&mut rng, cfg.trans_cost)).collect();
    let c_birth = (0..n).map(|_| draw(&mut rng, cfg.endpoint_cost)).collect();
    let c_death = (0..n).map(|_| draw(&mut rng, cfg.endpoint_cost)).collect();
    let q = if cfg.quadratic {
        (0..p).map(|_| draw(&mut rng, cfg.q_range)).collect()
    } else {
        vec![0.0; p]
    };
    CostedGraph {
        graph,
        c_det,
        c_trans,
        c_birth,
        c_death,
        q,
    }
}

/// A random feasible flow over `graph`: detections activate with the
/// given probability and link to a random available predecessor when
/// one exists.
pub fn random_flow(graph: &TrackingGraph, seed: u64, activate_prob: f64) -> FlowSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut open_tail = vec![false; graph.num_detections()];
    let mut tracks: Vec<Track> = Vec::new();
    let mut track_of: Vec<Option<usize>> = vec![None; graph.num_detections()];
    for i in 0..graph.num_detections() {
        if !rng.gen_bool(activate_prob) {
            continue;
        }
        let preds: Vec<usize> = graph
            .in_edges(i)
            .iter()
            .map(|&e| graph.edges[e].src)
            .filter(|&s| open_tail[s])
            .collect();
        if !preds.is_empty() && rng.gen_bool(0.7) {
            let src = preds[rng.gen_range(0..preds.len())];
            open_tail[src] = false;
            let t = track_of[src].unwrap();
            tracks[t].detections.push(i);
            track_of[i] = Some(t);
        } else {
            tracks.push(Track {
                detections: vec![i],
            });
            track_of[i] = Some(tracks.len() - 1);
        }
        open_tail[i] = true;
    }
    crate::flow::tracks_to_flow(graph, &tracks).expect("constructed flow is feasible")
}
