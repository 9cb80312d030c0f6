//! Detections and the directed acyclic association graph built from
//! them: transition edges across frames and same-frame pairwise
//! relations.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Number of spatial relation bins per ordered detection pair.
pub const RELATION_DIM: usize = 8;

/// Indices of the mutually exclusive relation bins (exactly one of the
/// first seven fires) plus the independent strictly-overlap bit.
pub const REL_ON_TOP: usize = 0;
pub const REL_ABOVE: usize = 1;
pub const REL_BELOW: usize = 2;
pub const REL_NEXT_TO: usize = 3;
pub const REL_NEAR: usize = 4;
pub const REL_FAR: usize = 5;
pub const REL_OVERLAP: usize = 6;
pub const REL_STRICT_OVERLAP: usize = 7;

/// One candidate box at a (location, scale, frame) site.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Unique id within a sequence.
    pub id: u64,
    pub frame: u32,
    pub class_id: usize,
    pub bbox: BBox,
    /// Detector confidence.
    pub score: f64,
    /// Estimated motion in pixels per frame, used to predict the box in
    /// later frames. Zero when no estimate is available.
    pub velocity: (f64, f64),
}

impl Detection {
    pub fn new(id: u64, frame: u32, class_id: usize, bbox: BBox, score: f64) -> Self {
        Detection {
            id,
            frame,
            class_id,
            bbox,
            score,
            velocity: (0.0, 0.0),
        }
    }
}

/// A candidate link between two detections in different frames.
/// `src` and `dst` index into [`TrackingGraph::detections`].
#[derive(Debug, Clone, Copy)]
pub struct TransitionEdge {
    pub src: usize,
    pub dst: usize,
    /// Frame difference, at least 1.
    pub gap: u32,
    /// IoU of the source's motion-predicted box with the destination box.
    pub predicted_overlap: f64,
}

/// An ordered same-frame pair with its spatial relation vector. Both
/// (i, j) and (j, i) are present; relations are computed directionally
/// (the vector describes where `j` sits relative to `i`).
#[derive(Debug, Clone)]
pub struct PairwisePair {
    pub i: usize,
    pub j: usize,
    pub relation: Vec<f64>,
}

/// Parameters controlling graph construction.
#[derive(Debug, Clone)]
pub struct GraphParams {
    pub num_classes: usize,
    /// Relation vector length, normally [`RELATION_DIM`].
    pub relation_dim: usize,
    /// Longest admissible frame jump for a transition edge.
    pub max_gap: u32,
    /// Minimum predicted overlap for a transition edge (exclusive).
    pub link_threshold: f64,
    /// Detections with score <= this are dropped.
    pub score_threshold: f64,
}

impl GraphParams {
    /// Defaults used with learned weight vectors.
    pub fn learned(num_classes: usize) -> Self {
        GraphParams {
            num_classes,
            relation_dim: RELATION_DIM,
            max_gap: 8,
            link_threshold: 0.3,
            score_threshold: -0.5,
        }
    }

    /// Stricter defaults for unlearned baseline runs.
    pub fn baseline(num_classes: usize) -> Self {
        GraphParams {
            num_classes,
            relation_dim: RELATION_DIM,
            max_gap: 8,
            link_threshold: 0.5,
            score_threshold: 0.0,
        }
    }
}

/// The association graph: detections (nodes), transition edges and
/// same-frame pairwise relations. Edges always point forward in time,
/// so the graph is acyclic by construction.
#[derive(Debug, Clone)]
pub struct TrackingGraph {
    /// Sorted by (frame, id); edge and pair endpoints are indices here.
    pub detections: Vec<Detection>,
    pub edges: Vec<TransitionEdge>,
    pub pairs: Vec<PairwisePair>,
    pub num_classes: usize,
    pub relation_dim: usize,
    pub frame_range: Option<(u32, u32)>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    det_pairs: Vec<Vec<usize>>,
}

impl TrackingGraph {
    /// Assembles a graph from parts, validating the structural
    /// invariants: endpoints in range, edges forward in time with
    /// consistent gaps, pairs within one frame, classes in range.
    pub fn new(
        detections: Vec<Detection>,
        edges: Vec<TransitionEdge>,
        pairs: Vec<PairwisePair>,
        num_classes: usize,
        relation_dim: usize,
    ) -> Result<Self> {
        let n = detections.len();
        for w in detections.windows(2) {
            if (w[1].frame, w[1].id) <= (w[0].frame, w[0].id) {
                return Err(Error::Graph(
                    "detections must be sorted by (frame, id)".into(),
                ));
            }
        }
        for d in &detections {
            if !d.bbox.is_valid() {
                return Err(Error::Graph(format!("detection {} has a malformed box", d.id)));
            }
            if d.class_id >= num_classes {
                return Err(Error::Graph(format!(
                    "detection {} has class {} but the graph has {} classes",
                    d.id, d.class_id, num_classes
                )));
            }
        }
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Graph("edge endpoint out of range".into()));
            }
            let (s, d) = (&detections[e.src], &detections[e.dst]);
            if d.frame <= s.frame || d.frame - s.frame != e.gap || e.gap == 0 {
                return Err(Error::Graph(format!(
                    "edge {}->{} has inconsistent gap",
                    s.id, d.id
                )));
            }
        }
        for p in &pairs {
            if p.i >= n || p.j >= n || p.i == p.j {
                return Err(Error::Graph("pair endpoint out of range".into()));
            }
            if detections[p.i].frame != detections[p.j].frame {
                return Err(Error::Graph("pair spans two frames".into()));
            }
            if p.relation.len() != relation_dim {
                return Err(Error::Graph("pair relation vector has the wrong length".into()));
            }
        }

        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            out_edges[e.src].push(idx);
            in_edges[e.dst].push(idx);
        }
        // Deterministic relaxation order: ascending source/destination index.
        for l in in_edges.iter_mut() {
            l.sort_by_key(|&idx| edges[idx].src);
        }
        for l in out_edges.iter_mut() {
            l.sort_by_key(|&idx| edges[idx].dst);
        }
        let mut det_pairs = vec![Vec::new(); n];
        for (idx, p) in pairs.iter().enumerate() {
            det_pairs[p.i].push(idx);
        }

        let frame_range = match (detections.first(), detections.last()) {
            (Some(a), Some(b)) => Some((a.frame, b.frame)),
            _ => None,
        };

        Ok(TrackingGraph {
            detections,
            edges,
            pairs,
            num_classes,
            relation_dim,
            frame_range,
            in_edges,
            out_edges,
            det_pairs,
        })
    }

    pub fn num_detections(&self) -> usize {
        self.detections.len()
    }

    /// Edge indices arriving at detection `i`, sorted by source index.
    pub fn in_edges(&self, i: usize) -> &[usize] {
        &self.in_edges[i]
    }

    /// Edge indices leaving detection `i`, sorted by destination index.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    /// Pair indices whose first element is detection `i`.
    pub fn pairs_of(&self, i: usize) -> &[usize] {
        &self.det_pairs[i]
    }

    /// Index of the edge from `src` to `dst`, if present.
    pub fn edge_between(&self, src: usize, dst: usize) -> Option<usize> {
        self.out_edges[src]
            .iter()
            .copied()
            .find(|&e| self.edges[e].dst == dst)
    }
}

/// Extrapolates a detection's box `gap` frames forward under its
/// constant-velocity estimate. With zero velocity this is the identity.
pub fn predict_box(det: &Detection, gap: u32) -> BBox {
    let g = gap as f64;
    det.bbox.translated(det.velocity.0 * g, det.velocity.1 * g)
}

/// Candidate transition edges: pairs (i, j) within `max_gap` frames, of
/// the same class, whose predicted overlap exceeds `link_threshold`.
/// `detections` must be sorted by frame.
pub fn link_candidates(
    detections: &[Detection],
    max_gap: u32,
    link_threshold: f64,
) -> Vec<TransitionEdge> {
    let mut edges = Vec::new();
    for (i, src) in detections.iter().enumerate() {
        for (off, dst) in detections[i + 1..].iter().enumerate() {
            let j = i + 1 + off;
            if dst.frame == src.frame {
                continue;
            }
            let gap = dst.frame - src.frame;
            if gap > max_gap {
                break; // sorted by frame: later candidates only get farther
            }
            if dst.class_id != src.class_id {
                continue;
            }
            let ov = predict_box(src, gap).iou(&dst.bbox);
            if ov > link_threshold {
                edges.push(TransitionEdge {
                    src: i,
                    dst: j,
                    gap,
                    predicted_overlap: ov,
                });
            }
        }
    }
    edges
}

/// Bins the configuration of box `b` relative to box `a` into the eight
/// relation slots. Exactly one of the first seven fires; the
/// strictly-overlap bit (intersection over the area of `a` above 0.9)
/// is independent.
///
/// Geometry: with d the center distance and s the mean of the two box
/// diagonals, overlapping pairs are split at d = 0.25 s into "on top
/// of" (near-coincident) and "overlap"; disjoint pairs go to
/// above/below or next-to when one offset axis dominates the other by
/// 2x and stays under 2 s, to "near" when d < 2 s, and to "far"
/// otherwise.
pub fn spatial_relation(a: &BBox, b: &BBox) -> [f64; RELATION_DIM] {
    let mut rel = [0.0; RELATION_DIM];
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let (dx, dy) = (bx - ax, by - ay);
    let d = dx.hypot(dy);
    let s = (a.diagonal() + b.diagonal()) / 2.0;
    let iou = a.iou(b);

    let primary = if iou > 0.0 {
        if d < 0.25 * s {
            REL_ON_TOP
        } else {
            REL_OVERLAP
        }
    } else if dy.abs() >= 2.0 * dx.abs() && dy.abs() < 2.0 * s {
        // y grows downward: negative dy means b sits above a.
        if dy < 0.0 {
            REL_ABOVE
        } else {
            REL_BELOW
        }
    } else if dx.abs() >= 2.0 * dy.abs() && dx.abs() < 2.0 * s {
        REL_NEXT_TO
    } else if d < 2.0 * s {
        REL_NEAR
    } else {
        REL_FAR
    };
    rel[primary] = 1.0;

    if a.overlap_over_self(b) > 0.9 {
        rel[REL_STRICT_OVERLAP] = 1.0;
    }
    rel
}

/// Builds the full association graph: drops low-scoring detections,
/// links candidates across frames and enumerates ordered same-frame
/// pairs with their relation vectors. Rejects duplicate detection ids.
pub fn build_graph(detections: Vec<Detection>, params: &GraphParams) -> Result<TrackingGraph> {
    let mut dets: Vec<Detection> = detections
        .into_iter()
        .filter(|d| d.score > params.score_threshold)
        .collect();
    dets.sort_by_key(|d| (d.frame, d.id));
    for w in dets.windows(2) {
        if w[0].id == w[1].id {
            return Err(Error::Graph(format!("duplicate detection id {}", w[0].id)));
        }
    }
    {
        let mut ids: Vec<u64> = dets.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Graph("duplicate detection id".into()));
        }
    }

    let edges = link_candidates(&dets, params.max_gap, params.link_threshold);

    let mut pairs = Vec::new();
    let mut start = 0;
    while start < dets.len() {
        let frame = dets[start].frame;
        let mut end = start;
        while end < dets.len() && dets[end].frame == frame {
            end += 1;
        }
        for i in start..end {
            for j in start..end {
                if i == j {
                    continue;
                }
                let relation = spatial_relation(&dets[i].bbox, &dets[j].bbox).to_vec();
                pairs.push(PairwisePair { i, j, relation });
            }
        }
        start = end;
    }

    TrackingGraph::new(dets, edges, pairs, params.num_classes, params.relation_dim)
}
