//! Binary flow assignments over a tracking graph and their
//! decomposition into tracks.

use crate::error::{Error, Result};
use crate::graph::TrackingGraph;

/// A 0/1 assignment to every flow variable: one detection, birth and
/// death indicator per detection and one indicator per transition edge.
///
/// Feasibility means flow conservation at every detection i:
/// birth(i) + sum of incoming transitions = det(i) = death(i) + sum of
/// outgoing transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub det: Vec<bool>,
    pub trans: Vec<bool>,
    pub birth: Vec<bool>,
    pub death: Vec<bool>,
    /// Objective value reported by the solver that produced this flow.
    pub objective: f64,
}

impl FlowSolution {
    pub fn zeros(graph: &TrackingGraph) -> Self {
        FlowSolution {
            det: vec![false; graph.num_detections()],
            trans: vec![false; graph.edges.len()],
            birth: vec![false; graph.num_detections()],
            death: vec![false; graph.num_detections()],
            objective: 0.0,
        }
    }

    pub fn num_active(&self) -> usize {
        self.det.iter().filter(|&&b| b).count()
    }

    /// Verifies flow conservation and dimension agreement with `graph`.
    pub fn check_conservation(&self, graph: &TrackingGraph) -> Result<()> {
        let n = graph.num_detections();
        if self.det.len() != n
            || self.birth.len() != n
            || self.death.len() != n
            || self.trans.len() != graph.edges.len()
        {
            return Err(Error::Flow("flow dimensions do not match graph".into()));
        }
        for i in 0..n {
            let inflow = self.birth[i] as usize
                + graph
                    .in_edges(i)
                    .iter()
                    .filter(|&&e| self.trans[e])
                    .count();
            let outflow = self.death[i] as usize
                + graph
                    .out_edges(i)
                    .iter()
                    .filter(|&&e| self.trans[e])
                    .count();
            let f = self.det[i] as usize;
            if inflow != f || outflow != f {
                return Err(Error::Flow(format!(
                    "conservation violated at detection {} (in {}, det {}, out {})",
                    graph.detections[i].id, inflow, f, outflow
                )));
            }
        }
        Ok(())
    }

    /// Lexicographic key over (det, trans, birth, death), used for
    /// deterministic tie-breaking among equal-cost flows.
    pub(crate) fn lex_key(&self) -> Vec<bool> {
        let mut key =
            Vec::with_capacity(self.det.len() * 3 + self.trans.len());
        key.extend_from_slice(&self.det);
        key.extend_from_slice(&self.trans);
        key.extend_from_slice(&self.birth);
        key.extend_from_slice(&self.death);
        key
    }
}

/// One object track: detection indices with strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub detections: Vec<usize>,
}

/// Decomposes a feasible flow into node-disjoint source-to-sink paths,
/// ordered by first frame then detection index. The union of the tracks
/// covers exactly the active detections.
pub fn extract_tracks(graph: &TrackingGraph, flow: &FlowSolution) -> Result<Vec<Track>> {
    flow.check_conservation(graph)?;
    let mut tracks = Vec::new();
    // Detections are sorted by (frame, id), so index order is already
    // (first frame, id) order for the track heads.
    for head in 0..graph.num_detections() {
        if !flow.birth[head] {
            continue;
        }
        let mut track = vec![head];
        let mut cur = head;
        while !flow.death[cur] {
            let next_edge = graph
                .out_edges(cur)
                .iter()
                .copied()
                .find(|&e| flow.trans[e])
                .ok_or_else(|| Error::Flow("active detection with no continuation".into()))?;
            cur = graph.edges[next_edge].dst;
            track.push(cur);
        }
        tracks.push(Track { detections: track });
    }
    Ok(tracks)
}

/// Re-encodes a set of node-disjoint tracks as a flow. Consecutive
/// track members must be connected by a graph edge.
pub fn tracks_to_flow(graph: &TrackingGraph, tracks: &[Track]) -> Result<FlowSolution> {
    let mut flow = FlowSolution::zeros(graph);
    for track in tracks {
        let dets = &track.detections;
        if dets.is_empty() {
            continue;
        }
        for &d in dets {
            if flow.det[d] {
                return Err(Error::Flow("tracks share a detection".into()));
            }
            flow.det[d] = true;
        }
        flow.birth[dets[0]] = true;
        flow.death[*dets.last().unwrap()] = true;
        for w in dets.windows(2) {
            let e = graph
                .edge_between(w[0], w[1])
                .ok_or_else(|| Error::Flow("track uses a missing edge".into()))?;
            flow.trans[e] = true;
        }
    }
    flow.check_conservation(graph)?;
    Ok(flow)
}
