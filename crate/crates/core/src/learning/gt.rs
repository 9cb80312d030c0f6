//! Mapping ground-truth boxes onto flow variables and the decomposable
//! loss over them.

use crate::flow::{tracks_to_flow, FlowSolution, Track};
use crate::geometry::BBox;
use crate::graph::TrackingGraph;

/// IoU above which a detection window counts as matching a ground-truth
/// label, reused for claims and virtual-detection truth.
pub const CLAIM_IOU: f64 = 0.5;

/// One labeled box. `ambiguous` marks ignore regions: such boxes never
/// claim detections and detections over them are removed before
/// training.
#[derive(Debug, Clone)]
pub struct GroundTruthBox {
    pub frame: u32,
    pub track_id: i64,
    pub class_id: usize,
    pub bbox: BBox,
    pub ambiguous: bool,
}

/// Ground-truth flow plus the identity label each detection claimed.
#[derive(Debug, Clone)]
pub struct GtMapping {
    pub flow: FlowSolution,
    /// Ground-truth track id per detection, None for false detections.
    pub claimed: Vec<Option<i64>>,
}

/// Maps labels to flows: per frame, each ground-truth box claims the
/// highest-scoring overlapping unclaimed detection of its class; per
/// track identity, a longest-path sweep over the graph edges instances
/// the path claiming the most detections. Identities with no claims
/// simply vanish.
pub fn map_ground_truth(graph: &TrackingGraph, gts: &[GroundTruthBox]) -> GtMapping {
    let n = graph.num_detections();
    let mut claimed: Vec<Option<i64>> = vec![None; n];

    let mut ordered: Vec<&GroundTruthBox> = gts.iter().filter(|g| !g.ambiguous).collect();
    ordered.sort_by_key(|g| (g.frame, g.track_id));
    // Frame index ranges of the (frame, id)-sorted detection list.
    for gt in &ordered {
        let mut best: Option<usize> = None;
        for (i, det) in graph.detections.iter().enumerate() {
            if det.frame != gt.frame
                || det.class_id != gt.class_id
                || claimed[i].is_some()
                || det.bbox.iou(&gt.bbox) < CLAIM_IOU
            {
                continue;
            }
            if best.map_or(true, |b| det.score > graph.detections[b].score) {
                best = Some(i);
            }
        }
        if let Some(i) = best {
            claimed[i] = Some(gt.track_id);
        }
    }

    let mut ids: Vec<i64> = claimed.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();

    let mut tracks = Vec::new();
    for id in ids {
        let members: Vec<usize> = (0..n).filter(|&i| claimed[i] == Some(id)).collect();
        // Longest path through this identity's claimed detections,
        // following graph edges (gap edges bridge detection holes).
        let mut count = vec![1usize; members.len()];
        let mut pred: Vec<Option<usize>> = vec![None; members.len()];
        for (mi, &i) in members.iter().enumerate() {
            for (mj, &j) in members.iter().enumerate().take(mi) {
                if graph.edge_between(j, i).is_some() && count[mj] + 1 > count[mi] {
                    count[mi] = count[mj] + 1;
                    pred[mi] = Some(mj);
                }
            }
        }
        let Some(best_end) = (0..members.len()).max_by_key(|&mi| (count[mi], usize::MAX - mi))
        else {
            continue;
        };
        let mut path = Vec::new();
        let mut cur = Some(best_end);
        while let Some(mi) = cur {
            path.push(members[mi]);
            cur = pred[mi];
        }
        path.reverse();
        tracks.push(Track { detections: path });
    }

    let flow = tracks_to_flow(graph, &tracks)
        .expect("claimed paths are node-disjoint and follow graph edges");
    GtMapping { flow, claimed }
}

/// Endpoint taxonomy of a transition edge against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// false -> false
    Nn,
    /// true -> false
    Pn,
    /// false -> true
    Np,
    /// true -> true, same identity
    PpSame,
    /// true -> true, different identities
    PpDiff,
}

/// Classifies an edge and counts its interpolated virtual detections:
/// boxes lerped at the skipped frames, true when they overlap any
/// non-ambiguous label there.
pub fn classify_transition(
    graph: &TrackingGraph,
    edge_idx: usize,
    mapping: &GtMapping,
    gts: &[GroundTruthBox],
) -> (TransitionKind, usize, usize) {
    let edge = &graph.edges[edge_idx];
    let src_true = mapping.flow.det[edge.src];
    let dst_true = mapping.flow.det[edge.dst];
    let kind = match (src_true, dst_true) {
        (false, false) => TransitionKind::Nn,
        (true, false) => TransitionKind::Pn,
        (false, true) => TransitionKind::Np,
        (true, true) => {
            if mapping.claimed[edge.src] == mapping.claimed[edge.dst] {
                TransitionKind::PpSame
            } else {
                TransitionKind::PpDiff
            }
        }
    };

    let src = &graph.detections[edge.src];
    let dst = &graph.detections[edge.dst];
    let mut true_virtual = 0;
    let mut false_virtual = 0;
    for k in 1..edge.gap {
        let t = k as f64 / edge.gap as f64;
        let vbox = src.bbox.lerp(&dst.bbox, t);
        let frame = src.frame + k;
        let overlaps = gts.iter().any(|g| {
            !g.ambiguous && g.frame == frame && vbox.iou(&g.bbox) >= CLAIM_IOU
        });
        if overlaps {
            true_virtual += 1;
        } else {
            false_virtual += 1;
        }
    }
    (kind, true_virtual, false_virtual)
}

/// Per-variable penalties: plain Hamming (1) on detection, birth and
/// death variables; transition penalties follow the endpoint taxonomy
/// with tv/fv the virtual-detection counts:
/// NN -> tv+fv, PN and NP -> tv+fv+1, PP-same -> tv, PP-diff -> tv+fv+2.
#[derive(Debug, Clone)]
pub struct LossVector {
    pub det: Vec<f64>,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    pub trans: Vec<f64>,
}

pub fn transition_loss(kind: TransitionKind, tv: usize, fv: usize) -> f64 {
    let (tv, fv) = (tv as f64, fv as f64);
    match kind {
        TransitionKind::Nn => tv + fv,
        TransitionKind::Pn | TransitionKind::Np => tv + fv + 1.0,
        TransitionKind::PpSame => tv,
        TransitionKind::PpDiff => tv + fv + 2.0,
    }
}

pub fn loss_vector(
    graph: &TrackingGraph,
    mapping: &GtMapping,
    gts: &[GroundTruthBox],
) -> LossVector {
    let n = graph.num_detections();
    let trans = (0..graph.edges.len())
        .map(|e| {
            let (kind, tv, fv) = classify_transition(graph, e, mapping, gts);
            transition_loss(kind, tv, fv)
        })
        .collect();
    LossVector {
        det: vec![1.0; n],
        birth: vec![1.0; n],
        death: vec![1.0; n],
        trans,
    }
}

impl LossVector {
    /// Weighted Hamming distance between a ground-truth flow and
    /// (possibly fractional) inferred values.
    pub fn weighted_distance(&self, gt: &FlowSolution, values: &crate::potentials::FlowValues) -> f64 {
        let mut total = 0.0;
        for i in 0..self.det.len() {
            total += self.det[i] * (values.det[i] - gt.det[i] as u8 as f64).abs();
            total += self.birth[i] * (values.birth[i] - gt.birth[i] as u8 as f64).abs();
            total += self.death[i] * (values.death[i] - gt.death[i] as u8 as f64).abs();
        }
        for e in 0..self.trans.len() {
            total += self.trans[e] * (values.trans[e] - gt.trans[e] as u8 as f64).abs();
        }
        total
    }
}
