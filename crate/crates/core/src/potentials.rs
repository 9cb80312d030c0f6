//! Learnable weights, per-element features and the mapping from
//! weights to flow costs.
//!
//! Sign convention, used everywhere: learning maximizes w'Psi, all
//! solvers minimize the cost C(f) = -w'Psi. Costs are therefore always
//! the negated dot product of a weight block with its feature.

use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::graph::{Detection, TrackingGraph, TransitionEdge};

/// Transition features use two slots per frame-gap bin, gaps 1..=8.
pub const TRANSITION_BINS: usize = 8;
pub const TRANSITION_DIM: usize = 2 * TRANSITION_BINS;
pub const APPEARANCE_DIM: usize = 2;

/// Block layout of weight and feature vectors:
/// [birth | death | appearance(2) | transition(16) | pairwise(D*K^2)],
/// with the pairwise block (a, b) stored at offset (a*K + b)*D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub num_classes: usize,
    pub relation_dim: usize,
}

impl BlockLayout {
    pub fn new(num_classes: usize, relation_dim: usize) -> Self {
        BlockLayout {
            num_classes,
            relation_dim,
        }
    }

    pub fn of_graph(graph: &TrackingGraph) -> Self {
        BlockLayout::new(graph.num_classes, graph.relation_dim)
    }

    pub const fn birth_offset(&self) -> usize {
        0
    }

    pub const fn death_offset(&self) -> usize {
        1
    }

    pub const fn appearance_offset(&self) -> usize {
        2
    }

    pub const fn transition_offset(&self) -> usize {
        2 + APPEARANCE_DIM
    }

    pub const fn pairwise_offset(&self) -> usize {
        2 + APPEARANCE_DIM + TRANSITION_DIM
    }

    pub fn len(&self) -> usize {
        self.pairwise_offset() + self.relation_dim * self.num_classes * self.num_classes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value range of the pairwise block for ordered classes (a, b).
    pub fn pairwise_block(&self, class_a: usize, class_b: usize) -> std::ops::Range<usize> {
        debug_assert!(class_a < self.num_classes && class_b < self.num_classes);
        let start = self.pairwise_offset()
            + (class_a * self.num_classes + class_b) * self.relation_dim;
        start..start + self.relation_dim
    }
}

/// A flat vector with the block layout above. Used both for the
/// learnable weights and for feature totals of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub layout: BlockLayout,
    pub values: Vec<f64>,
}

pub type WeightVector = BlockVector;
pub type FeatureVector = BlockVector;

impl BlockVector {
    pub fn zeros(layout: BlockLayout) -> Self {
        BlockVector {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn from_values(layout: BlockLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Format(format!(
                "expected {} values for layout, got {}",
                layout.len(),
                values.len()
            )));
        }
        Ok(BlockVector { layout, values })
    }

    pub fn birth(&self) -> f64 {
        self.values[self.layout.birth_offset()]
    }

    pub fn death(&self) -> f64 {
        self.values[self.layout.death_offset()]
    }

    pub fn appearance(&self) -> &[f64] {
        &self.values[self.layout.appearance_offset()..self.layout.appearance_offset() + APPEARANCE_DIM]
    }

    pub fn transition(&self) -> &[f64] {
        &self.values[self.layout.transition_offset()..self.layout.transition_offset() + TRANSITION_DIM]
    }

    pub fn pairwise(&self, class_a: usize, class_b: usize) -> &[f64] {
        &self.values[self.layout.pairwise_block(class_a, class_b)]
    }

    pub fn set_birth(&mut self, v: f64) {
        self.values[self.layout.birth_offset()] = v;
    }

    pub fn set_death(&mut self, v: f64) {
        self.values[self.layout.death_offset()] = v;
    }

    pub fn appearance_mut(&mut self) -> &mut [f64] {
        let o = self.layout.appearance_offset();
        &mut self.values[o..o + APPEARANCE_DIM]
    }

    pub fn transition_mut(&mut self) -> &mut [f64] {
        let o = self.layout.transition_offset();
        &mut self.values[o..o + TRANSITION_DIM]
    }

    pub fn pairwise_mut(&mut self, class_a: usize, class_b: usize) -> &mut [f64] {
        let r = self.layout.pairwise_block(class_a, class_b);
        &mut self.values[r]
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        debug_assert_eq!(self.layout, other.layout);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// self += alpha * other
    pub fn add_scaled(&mut self, other: &BlockVector, alpha: f64) {
        debug_assert_eq!(self.layout, other.layout);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in self.values.iter_mut() {
            *v *= alpha;
        }
    }
}

/// A graph together with the cost of every flow variable and the
/// quadratic coefficient of every ordered same-frame pair.
#[derive(Debug, Clone)]
pub struct CostedGraph {
    pub graph: TrackingGraph,
    pub c_det: Vec<f64>,
    pub c_trans: Vec<f64>,
    pub c_birth: Vec<f64>,
    pub c_death: Vec<f64>,
    /// Quadratic cost per ordered pair, parallel to `graph.pairs`.
    pub q: Vec<f64>,
}

impl CostedGraph {
    /// All-zero costs over a graph; useful as a scaffold in tests.
    pub fn zero_costs(graph: TrackingGraph) -> Self {
        let n = graph.num_detections();
        let m = graph.edges.len();
        let p = graph.pairs.len();
        CostedGraph {
            graph,
            c_det: vec![0.0; n],
            c_trans: vec![0.0; m],
            c_birth: vec![0.0; n],
            c_death: vec![0.0; n],
            q: vec![0.0; p],
        }
    }

    pub fn has_quadratic_terms(&self) -> bool {
        self.q.iter().any(|&q| q != 0.0)
    }
}

/// Transition feature: two slots in the bin of the edge's frame gap.
/// Slot 0 is a constant 1; slot 1 is 1 when the predicted overlap is
/// below 0.5 (a weak link indicator). Gaps outside 1..=8 are an error.
pub fn transition_feature(edge: &TransitionEdge) -> Result<[f64; TRANSITION_DIM]> {
    if edge.gap == 0 || edge.gap as usize > TRANSITION_BINS {
        return Err(Error::Graph(format!(
            "transition gap {} outside 1..={}",
            edge.gap, TRANSITION_BINS
        )));
    }
    let mut feat = [0.0; TRANSITION_DIM];
    let bin = (edge.gap as usize - 1) * 2;
    feat[bin] = 1.0;
    if edge.predicted_overlap < 0.5 {
        feat[bin + 1] = 1.0;
    }
    Ok(feat)
}

/// Appearance feature: detector score plus a constant bias slot.
pub fn appearance_feature(det: &Detection) -> [f64; APPEARANCE_DIM] {
    [det.score, 1.0]
}

/// The relation vector of a pair written into the (class_i, class_j)
/// block of an otherwise-zero pairwise vector of length D*K^2.
pub fn pairwise_feature(
    layout: BlockLayout,
    relation: &[f64],
    class_i: usize,
    class_j: usize,
) -> Result<Vec<f64>> {
    if class_i >= layout.num_classes || class_j >= layout.num_classes {
        return Err(Error::Graph(format!(
            "pair classes ({class_i}, {class_j}) out of range"
        )));
    }
    if relation.len() != layout.relation_dim {
        return Err(Error::Graph("relation vector length mismatch".into()));
    }
    let k = layout.num_classes;
    let d = layout.relation_dim;
    let mut out = vec![0.0; d * k * k];
    let off = (class_i * k + class_j) * d;
    out[off..off + d].copy_from_slice(relation);
    Ok(out)
}

/// Fractional values for every flow variable plus the pair products,
/// the common ground between integral flows and LP relaxation output.
#[derive(Debug, Clone)]
pub struct FlowValues {
    pub det: Vec<f64>,
    pub trans: Vec<f64>,
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
    /// Per ordered pair: the (relaxed) product of the endpoint values.
    pub pair: Vec<f64>,
}

impl FlowValues {
    pub fn from_flow(graph: &TrackingGraph, flow: &FlowSolution) -> Self {
        let to_f = |v: &[bool]| v.iter().map(|&b| b as u8 as f64).collect::<Vec<_>>();
        let det = to_f(&flow.det);
        let pair = graph
            .pairs
            .iter()
            .map(|p| det[p.i] * det[p.j])
            .collect();
        FlowValues {
            det,
            trans: to_f(&flow.trans),
            birth: to_f(&flow.birth),
            death: to_f(&flow.death),
            pair,
        }
    }
}

/// Block-wise feature totals over the active variables of a feasible
/// flow. The pairwise block sums over ordered pairs whose endpoints are
/// both active.
pub fn features_of_flow(graph: &TrackingGraph, flow: &FlowSolution) -> Result<FeatureVector> {
    flow.check_conservation(graph)?;
    Ok(features_of_values(
        graph,
        &FlowValues::from_flow(graph, flow),
    ))
}

/// Feature totals for possibly-fractional variable values.
pub fn features_of_values(graph: &TrackingGraph, values: &FlowValues) -> FeatureVector {
    let layout = BlockLayout::of_graph(graph);
    let mut psi = BlockVector::zeros(layout);
    let mut birth_total = 0.0;
    let mut death_total = 0.0;
    let mut appearance = [0.0; APPEARANCE_DIM];
    for (i, d) in graph.detections.iter().enumerate() {
        let f = values.det[i];
        if f != 0.0 {
            let a = appearance_feature(d);
            appearance[0] += a[0] * f;
            appearance[1] += a[1] * f;
        }
        birth_total += values.birth[i];
        death_total += values.death[i];
    }
    psi.set_birth(birth_total);
    psi.set_death(death_total);
    psi.appearance_mut().copy_from_slice(&appearance);

    let mut transition = [0.0; TRANSITION_DIM];
    for (e, edge) in graph.edges.iter().enumerate() {
        let f = values.trans[e];
        if f != 0.0 {
            let feat = transition_feature(edge).expect("graph edge gaps validated on build");
            for (t, x) in transition.iter_mut().zip(feat) {
                *t += x * f;
            }
        }
    }
    psi.transition_mut().copy_from_slice(&transition);

    for (p, pair) in graph.pairs.iter().enumerate() {
        let u = values.pair[p];
        if u != 0.0 {
            let (ca, cb) = (
                graph.detections[pair.i].class_id,
                graph.detections[pair.j].class_id,
            );
            let block = psi.pairwise_mut(ca, cb);
            for (b, r) in block.iter_mut().zip(&pair.relation) {
                *b += r * u;
            }
        }
    }
    psi
}

/// Maps a weight vector to per-variable costs: every cost is the
/// negated dot product of the matching weight block with the element's
/// feature.
pub fn assign_costs(graph: &TrackingGraph, weights: &WeightVector) -> CostedGraph {
    assert_eq!(
        weights.layout,
        BlockLayout::of_graph(graph),
        "weight layout does not match graph classes/relation dim"
    );
    let wa = weights.appearance();
    let wt = weights.transition();
    let c_det = graph
        .detections
        .iter()
        .map(|d| {
            let a = appearance_feature(d);
            -(wa[0] * a[0] + wa[1] * a[1])
        })
        .collect();
    let c_trans = graph
        .edges
        .iter()
        .map(|e| {
            let feat = transition_feature(e).expect("graph edge gaps validated on build");
            -feat.iter().zip(wt).map(|(f, w)| f * w).sum::<f64>()
        })
        .collect();
    let n = graph.num_detections();
    let q = graph
        .pairs
        .iter()
        .map(|p| {
            let ws = weights.pairwise(
                graph.detections[p.i].class_id,
                graph.detections[p.j].class_id,
            );
            -p.relation.iter().zip(ws).map(|(r, w)| r * w).sum::<f64>()
        })
        .collect();
    CostedGraph {
        graph: graph.clone(),
        c_det,
        c_trans,
        c_birth: vec![-weights.birth(); n],
        c_death: vec![-weights.death(); n],
        q,
    }
}

/// Full objective of a feasible flow, including the quadratic terms
/// over ordered pairs with both endpoints active.
pub fn flow_cost(cg: &CostedGraph, flow: &FlowSolution) -> Result<f64> {
    flow.check_conservation(&cg.graph)?;
    Ok(flow_cost_unchecked(cg, flow))
}

pub(crate) fn flow_cost_unchecked(cg: &CostedGraph, flow: &FlowSolution) -> f64 {
    let mut total = 0.0;
    for i in 0..cg.graph.num_detections() {
        if flow.det[i] {
            total += cg.c_det[i];
        }
        if flow.birth[i] {
            total += cg.c_birth[i];
        }
        if flow.death[i] {
            total += cg.c_death[i];
        }
    }
    for (e, &on) in flow.trans.iter().enumerate() {
        if on {
            total += cg.c_trans[e];
        }
    }
    for (p, pair) in cg.graph.pairs.iter().enumerate() {
        if flow.det[pair.i] && flow.det[pair.j] {
            total += cg.q[p];
        }
    }
    total
}

/// Linear part of the objective only; the quadratic solvers use this
/// through [`flow_cost`], the linear ones report it directly.
pub(crate) fn linear_cost(cg: &CostedGraph, flow: &FlowSolution) -> f64 {
    let mut total = 0.0;
    for i in 0..cg.graph.num_detections() {
        if flow.det[i] {
            total += cg.c_det[i];
        }
        if flow.birth[i] {
            total += cg.c_birth[i];
        }
        if flow.death[i] {
            total += cg.c_death[i];
        }
    }
    for (e, &on) in flow.trans.iter().enumerate() {
        if on {
            total += cg.c_trans[e];
        }
    }
    total
}

/// Objective of fractional values: linear costs weighted by the values
/// plus q weighted by the pair products.
pub fn values_cost(cg: &CostedGraph, values: &FlowValues) -> f64 {
    let mut total = 0.0;
    for i in 0..cg.graph.num_detections() {
        total += cg.c_det[i] * values.det[i]
            + cg.c_birth[i] * values.birth[i]
            + cg.c_death[i] * values.death[i];
    }
    for (e, v) in values.trans.iter().enumerate() {
        total += cg.c_trans[e] * v;
    }
    for (p, u) in values.pair.iter().enumerate() {
        total += cg.q[p] * u;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{tracks_to_flow, Track};
    use crate::geometry::BBox;
    use crate::graph::{build_graph, Detection, GraphParams, PairwisePair};

    fn simple_graph() -> TrackingGraph {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let mut dets = Vec::new();
        for f in 0..3u32 {
            let mut d = Detection::new(f as u64, f, 0, b, 0.5 + f as f64 * 0.1);
            d.velocity = (0.0, 0.0);
            dets.push(d);
        }
        build_graph(dets, &GraphParams::learned(1)).unwrap()
    }

    #[test]
    fn transition_feature_slots() {
        let mk = |gap, ov| TransitionEdge {
            src: 0,
            dst: 1,
            gap,
            predicted_overlap: ov,
        };
        let f = transition_feature(&mk(1, 0.9)).unwrap();
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);

        let f = transition_feature(&mk(1, 0.4)).unwrap();
        assert_eq!((f[0], f[1]), (1.0, 1.0));
        assert_eq!(f.iter().sum::<f64>(), 2.0);

        let f = transition_feature(&mk(8, 0.6)).unwrap();
        assert_eq!(f[14], 1.0);
        assert_eq!(f.iter().sum::<f64>(), 1.0);

        assert!(transition_feature(&mk(9, 0.6)).is_err());
        assert!(transition_feature(&mk(0, 0.6)).is_err());
    }

    #[test]
    fn appearance_feature_is_score_and_bias() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        for score in [0.0, -0.3, 2.5] {
            let d = Detection::new(0, 0, 0, b, score);
            assert_eq!(appearance_feature(&d), [score, 1.0]);
        }
    }

    #[test]
    fn pairwise_feature_block_placement() {
        let layout = BlockLayout::new(2, 8);
        let rel = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let f = pairwise_feature(layout, &rel, 1, 0).unwrap();
        // Block (1, 0) sits at index (1*2 + 0) * 8 = 16.
        assert_eq!(&f[16..24], rel.as_slice());
        assert_eq!(f.iter().sum::<f64>(), 2.0);

        let layout1 = BlockLayout::new(1, 8);
        let f = pairwise_feature(layout1, &rel, 0, 0).unwrap();
        assert_eq!(&f[..8], rel.as_slice());

        assert!(pairwise_feature(layout, &rel, 2, 0).is_err());
    }

    #[test]
    fn features_of_zero_flow_are_zero() {
        let g = simple_graph();
        let psi = features_of_flow(&g, &FlowSolution::zeros(&g)).unwrap();
        assert!(psi.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_of_singleton_track() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let dets = vec![Detection::new(0, 0, 0, b, 0.7)];
        let g = build_graph(dets, &GraphParams::learned(1)).unwrap();
        let flow = tracks_to_flow(&g, &[Track { detections: vec![0] }]).unwrap();
        let psi = features_of_flow(&g, &flow).unwrap();
        assert_eq!(psi.birth(), 1.0);
        assert_eq!(psi.death(), 1.0);
        assert_eq!(psi.appearance(), &[0.7, 1.0]);
        assert!(psi.transition().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cost_feature_identity() {
        // flow_cost(assign_costs(g, w), f) == -<w, features_of_flow(g, f)>
        let g = simple_graph();
        let layout = BlockLayout::of_graph(&g);
        let mut w = BlockVector::zeros(layout);
        for (i, v) in w.values.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let cg = assign_costs(&g, &w);
        let flows = [
            tracks_to_flow(&g, &[Track { detections: vec![0, 1, 2] }]).unwrap(),
            tracks_to_flow(&g, &[Track { detections: vec![0, 1] }]).unwrap(),
            tracks_to_flow(
                &g,
                &[
                    Track { detections: vec![0] },
                    Track { detections: vec![1, 2] },
                ],
            )
            .unwrap(),
            FlowSolution::zeros(&g),
        ];
        for f in &flows {
            let psi = features_of_flow(&g, f).unwrap();
            let lhs = flow_cost(&cg, f).unwrap();
            assert!((lhs + w.dot(&psi)).abs() < 1e-9);
        }
    }

    #[test]
    fn cost_assignment_examples() {
        let g = simple_graph();
        let layout = BlockLayout::of_graph(&g);
        let zero = BlockVector::zeros(layout);
        let cg = assign_costs(&g, &zero);
        assert!(cg.c_det.iter().all(|&c| c == 0.0));
        assert!(cg.q.iter().all(|&c| c == 0.0));

        let mut w = BlockVector::zeros(layout);
        w.appearance_mut()[0] = 1.0;
        let cg = assign_costs(&g, &w);
        // score 0.5 -> cost -0.5
        assert!((cg.c_det[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn bilinearity_in_weights() {
        let g = simple_graph();
        let layout = BlockLayout::of_graph(&g);
        let mut w1 = BlockVector::zeros(layout);
        let mut w2 = BlockVector::zeros(layout);
        for (i, v) in w1.values.iter_mut().enumerate() {
            *v = (i as f64).cos();
        }
        for (i, v) in w2.values.iter_mut().enumerate() {
            *v = (i as f64 * 1.7).sin();
        }
        let alpha = 0.73;
        let mut combo = w1.clone();
        combo.scale(alpha);
        combo.add_scaled(&w2, 1.0);

        let f = tracks_to_flow(&g, &[Track { detections: vec![0, 1, 2] }]).unwrap();
        let c1 = flow_cost(&assign_costs(&g, &w1), &f).unwrap();
        let c2 = flow_cost(&assign_costs(&g, &w2), &f).unwrap();
        let cc = flow_cost(&assign_costs(&g, &combo), &f).unwrap();
        assert!((cc - (alpha * c1 + c2)).abs() < 1e-9);
    }

    #[test]
    fn quadratic_terms_count_both_orders() {
        // Two co-active same-frame detections with q = 2 on both ordered
        // pairs contribute +4 on top of the unary sum.
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let dets = vec![
            Detection::new(0, 0, 0, b, 1.0),
            Detection::new(1, 0, 0, b.translated(2.0, 0.0), 1.0),
        ];
        let pairs = vec![
            PairwisePair {
                i: 0,
                j: 1,
                relation: vec![0.0; 8],
            },
            PairwisePair {
                i: 1,
                j: 0,
                relation: vec![0.0; 8],
            },
        ];
        let g = TrackingGraph::new(dets, Vec::new(), pairs, 1, 8).unwrap();
        let mut cg = CostedGraph::zero_costs(g);
        cg.c_det = vec![-3.0, -3.0];
        cg.c_birth = vec![1.0, 1.0];
        cg.c_death = vec![1.0, 1.0];
        cg.q = vec![2.0, 2.0];

        let single = tracks_to_flow(&cg.graph, &[Track { detections: vec![0] }]).unwrap();
        assert!((flow_cost(&cg, &single).unwrap() + 1.0).abs() < 1e-12);

        let both = tracks_to_flow(
            &cg.graph,
            &[
                Track { detections: vec![0] },
                Track { detections: vec![1] },
            ],
        )
        .unwrap();
        assert!((flow_cost(&cg, &both).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flow_cost_rejects_infeasible() {
        let g = simple_graph();
        let cg = CostedGraph::zero_costs(g);
        let mut f = FlowSolution::zeros(&cg.graph);
        f.det[0] = true;
        assert!(flow_cost(&cg, &f).is_err());
    }
}
