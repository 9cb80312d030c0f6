//! Structured-SVM learning of the full weight vector with cutting
//! planes: loss-augmented inference finds the most violated labeling
//! per problem, violations aggregate into one constraint per round, and
//! a small dual QP re-solves the master.

pub mod gt;
pub mod qp;

pub use gt::{
    classify_transition, loss_vector, map_ground_truth, transition_loss, GroundTruthBox,
    GtMapping, LossVector, TransitionKind, CLAIM_IOU,
};
pub use qp::{master_objective, max_constraint_violation, solve_master_qp, ConstraintRow};

use crate::error::{Error, Result};
use crate::flow::FlowSolution;
use crate::graph::{build_graph, Detection, GraphParams, TrackingGraph};
use crate::oracle;
use crate::potentials::{
    assign_costs, features_of_flow, features_of_values, BlockLayout, BlockVector, CostedGraph,
    FeatureVector, FlowValues, WeightVector,
};
use crate::solvers::{greedy_dp_quadratic, lp_relax_solve, twopass_dp_quadratic};

/// One training instance: a graph, its ground-truth flow and the cached
/// feature totals and loss vector of that flow.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub graph: TrackingGraph,
    pub gt_flow: FlowSolution,
    pub gt_features: FeatureVector,
    pub loss: LossVector,
}

impl TrainingProblem {
    pub fn new(graph: TrackingGraph, gts: &[GroundTruthBox]) -> Result<Self> {
        let mapping = map_ground_truth(&graph, gts);
        let gt_features = features_of_flow(&graph, &mapping.flow)?;
        let loss = loss_vector(&graph, &mapping, gts);
        Ok(TrainingProblem {
            graph,
            gt_flow: mapping.flow,
            gt_features,
            loss,
        })
    }
}

/// Splits a sequence into fixed-length windows stepping by
/// length - overlap, rebuilding graphs and ground-truth flows per
/// window. Detections over ambiguous labels are removed first. Windows
/// extending past the sequence end are dropped; a sequence shorter than
/// one window becomes a single truncated problem.
pub fn chunk_sequences(
    detections: &[Detection],
    gts: &[GroundTruthBox],
    params: &GraphParams,
    length: u32,
    overlap: u32,
) -> Result<Vec<TrainingProblem>> {
    if length == 0 || overlap >= length {
        return Err(Error::Format(
            "chunking requires length > overlap >= 0".into(),
        ));
    }
    let frames: Vec<u32> = detections
        .iter()
        .map(|d| d.frame)
        .chain(gts.iter().map(|g| g.frame))
        .collect();
    let Some(&first) = frames.iter().min() else {
        return Ok(Vec::new());
    };
    let last = *frames.iter().max().unwrap();
    let total = last - first + 1;

    let kept: Vec<&Detection> = detections
        .iter()
        .filter(|d| {
            !gts.iter().any(|g| {
                g.ambiguous && g.frame == d.frame && d.bbox.iou(&g.bbox) >= CLAIM_IOU
            })
        })
        .collect();

    let step = length - overlap;
    let mut starts: Vec<u32> = (0..)
        .map(|k| first + k * step)
        .take_while(|s| s + length <= first + total)
        .collect();
    if starts.is_empty() {
        starts.push(first);
    }

    let mut problems = Vec::new();
    for start in starts {
        let end = start + length; // exclusive
        let window_dets: Vec<Detection> = kept
            .iter()
            .filter(|d| d.frame >= start && d.frame < end)
            .map(|d| (*d).clone())
            .collect();
        let window_gts: Vec<GroundTruthBox> = gts
            .iter()
            .filter(|g| !g.ambiguous && g.frame >= start && g.frame < end)
            .cloned()
            .collect();
        let graph = build_graph(window_dets, params)?;
        problems.push(TrainingProblem::new(graph, &window_gts)?);
    }
    Ok(problems)
}

/// Inference routine used inside the learning loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMethod {
    /// Greedy DP with pairwise updates; integral ("undergenerating").
    GreedyDp,
    /// Two-pass DP with pairwise updates; integral.
    TwopassDp,
    /// LP relaxation without rounding; may return fractional labelings
    /// ("overgenerating").
    Lp,
    /// Brute-force oracle; exact on tiny problems.
    Exact,
}

/// A labeling produced by loss-augmented inference; fractional values
/// when the LP relaxation produced them.
#[derive(Debug, Clone)]
pub struct InferredLabel {
    pub values: FlowValues,
}

/// Finds the labeling minimizing cost-minus-loss: variable costs are
/// shifted down by their loss where the ground truth is 0 and up where
/// it is 1, then the chosen solver runs. Returns the labeling and its
/// violation L(gt, f) - <w, psi(gt) - psi(f)>.
pub fn loss_augmented_infer(
    cg: &CostedGraph,
    loss: &LossVector,
    gt_flow: &FlowSolution,
    method: InferenceMethod,
) -> Result<(InferredLabel, f64)> {
    let mut aug = cg.clone();
    let shift = |c: &mut f64, l: f64, gt_on: bool| {
        if gt_on {
            *c += l;
        } else {
            *c -= l;
        }
    };
    for i in 0..aug.graph.num_detections() {
        shift(&mut aug.c_det[i], loss.det[i], gt_flow.det[i]);
        shift(&mut aug.c_birth[i], loss.birth[i], gt_flow.birth[i]);
        shift(&mut aug.c_death[i], loss.death[i], gt_flow.death[i]);
    }
    for e in 0..aug.graph.edges.len() {
        shift(&mut aug.c_trans[e], loss.trans[e], gt_flow.trans[e]);
    }

    let values = match method {
        InferenceMethod::GreedyDp => {
            FlowValues::from_flow(&aug.graph, &greedy_dp_quadratic(&aug))
        }
        InferenceMethod::TwopassDp => {
            FlowValues::from_flow(&aug.graph, &twopass_dp_quadratic(&aug))
        }
        InferenceMethod::Lp => {
            let lp = lp_relax_solve(&aug)?;
            FlowValues {
                det: lp.det,
                trans: lp.trans,
                birth: lp.birth,
                death: lp.death,
                pair: lp.pair_u,
            }
        }
        InferenceMethod::Exact => {
            let best = oracle::brute_force_optimum(&aug)?;
            FlowValues::from_flow(&aug.graph, &best.best_flow)
        }
    };

    // violation = L - (C(f) - C(gt)) under the original costs; the w
    // dependence folds into the costs.
    let l = loss.weighted_distance(gt_flow, &values);
    let c_hat = crate::potentials::values_cost(cg, &values);
    let c_gt = crate::potentials::values_cost(cg, &FlowValues::from_flow(&cg.graph, gt_flow));
    let violation = l - (c_hat - c_gt);
    Ok((InferredLabel { values }, violation))
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Slack trade-off C of the master objective.
    pub c: f64,
    /// New constraints must be violated by more than xi + eps.
    pub eps: f64,
    pub max_iterations: usize,
    pub method: InferenceMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: (2.0f64).powi(-7),
            eps: 1e-4,
            max_iterations: 100,
            method: InferenceMethod::GreedyDp,
        }
    }
}

/// The default C grid used for model selection sweeps.
pub fn c_grid() -> Vec<f64> {
    (-9..=3).map(|e| (2.0f64).powi(e)).collect()
}

#[derive(Debug, Clone)]
pub struct IterationStats {
    pub master_objective: f64,
    pub xi: f64,
    /// Violation of the aggregated constraint found this round.
    pub violation: f64,
    pub constraint_added: bool,
    /// Largest violation of the stored rows beyond xi after the
    /// re-solve; at most the KKT tolerance when the QP converged.
    pub max_stored_violation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub iterations: Vec<IterationStats>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: WeightVector,
    pub trace: TrainTrace,
}

/// Cutting-plane training: per round, find each problem's most violated
/// labeling under the current weights, aggregate the feature
/// differences and losses into one constraint, and re-solve the master
/// QP if that constraint is violated beyond xi + eps. Stops when no
/// constraint is added or the iteration cap is hit.
pub fn cutting_plane_train(
    problems: &[TrainingProblem],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let Some(first) = problems.first() else {
        return Err(Error::Format("training needs at least one problem".into()));
    };
    let layout = BlockLayout::of_graph(&first.graph);
    let mut weights = BlockVector::zeros(layout);
    let mut xi = 0.0f64;
    let mut rows: Vec<ConstraintRow> = Vec::new();
    let mut trace = TrainTrace::default();

    for _iter in 0..cfg.max_iterations {
        let mut delta = BlockVector::zeros(layout);
        let mut total_loss = 0.0;
        for prob in problems {
            let cg = assign_costs(&prob.graph, &weights);
            let (label, _violation) =
                loss_augmented_infer(&cg, &prob.loss, &prob.gt_flow, cfg.method)?;
            let psi_hat = features_of_values(&prob.graph, &label.values);
            delta.add_scaled(&prob.gt_features, 1.0);
            delta.add_scaled(&psi_hat, -1.0);
            total_loss += prob.loss.weighted_distance(&prob.gt_flow, &label.values);
        }
        let violation = total_loss - weights.dot(&delta);
        let add = violation > xi + cfg.eps;
        if add {
            rows.push(ConstraintRow {
                delta_psi: delta,
                loss: total_loss,
            });
            let (w, new_xi) = solve_master_qp(&rows, cfg.c, &weights);
            weights = w;
            xi = new_xi;
        }
        trace.iterations.push(IterationStats {
            master_objective: master_objective(&weights, xi, cfg.c),
            xi,
            violation,
            constraint_added: add,
            max_stored_violation: max_constraint_violation(&rows, &weights, xi),
        });
        if !add {
            break;
        }
    }
    Ok(TrainOutcome { weights, trace })
}

/// Plain (unit) Hamming distance between two flows on the same graph.
pub fn hamming_distance(a: &FlowSolution, b: &FlowSolution) -> usize {
    let count = |x: &[bool], y: &[bool]| x.iter().zip(y).filter(|(u, v)| u != v).count();
    count(&a.det, &b.det)
        + count(&a.trans, &b.trans)
        + count(&a.birth, &b.birth)
        + count(&a.death, &b.death)
}

/// Runs plain inference (no loss augmentation) on a problem under the
/// given weights, for evaluating training progress.
pub fn predict_flow(
    problem: &TrainingProblem,
    weights: &WeightVector,
    method: InferenceMethod,
) -> Result<FlowSolution> {
    let cg = assign_costs(&problem.graph, weights);
    let flow = match method {
        InferenceMethod::GreedyDp => greedy_dp_quadratic(&cg),
        InferenceMethod::TwopassDp => twopass_dp_quadratic(&cg),
        InferenceMethod::Lp => {
            crate::solvers::solve_quadratic(&cg, crate::solvers::QuadMethod::LpRound)?.flow
        }
        InferenceMethod::Exact => oracle::brute_force_optimum(&cg)?.best_flow,
    };
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::potentials::flow_cost;

    fn gt(frame: u32, track_id: i64, bbox: BBox) -> GroundTruthBox {
        GroundTruthBox {
            frame,
            track_id,
            class_id: 0,
            bbox,
            ambiguous: false,
        }
    }

    fn chain_problem(frames: u32) -> TrainingProblem {
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let dets: Vec<Detection> = (0..frames)
            .map(|f| Detection::new(f as u64, f, 0, b, 1.0))
            .collect();
        let graph = build_graph(dets, &GraphParams::learned(1)).unwrap();
        let gts: Vec<GroundTruthBox> = (0..frames).map(|f| gt(f, 1, b)).collect();
        TrainingProblem::new(graph, &gts).unwrap()
    }

    #[test]
    fn loss_augmentation_identity() {
        // Augmented cost equals cost minus loss plus a gt-only constant,
        // checked exhaustively over all feasible flows.
        let prob = chain_problem(3);
        let mut weights = BlockVector::zeros(BlockLayout::of_graph(&prob.graph));
        for (i, v) in weights.values.iter_mut().enumerate() {
            *v = ((i * 13 % 7) as f64 - 3.0) * 0.1;
        }
        let cg = assign_costs(&prob.graph, &weights);
        let mut aug = cg.clone();
        for i in 0..aug.graph.num_detections() {
            if prob.gt_flow.det[i] {
                aug.c_det[i] += prob.loss.det[i];
            } else {
                aug.c_det[i] -= prob.loss.det[i];
            }
            if prob.gt_flow.birth[i] {
                aug.c_birth[i] += prob.loss.birth[i];
            } else {
                aug.c_birth[i] -= prob.loss.birth[i];
            }
            if prob.gt_flow.death[i] {
                aug.c_death[i] += prob.loss.death[i];
            } else {
                aug.c_death[i] -= prob.loss.death[i];
            }
        }
        for e in 0..aug.graph.edges.len() {
            if prob.gt_flow.trans[e] {
                aug.c_trans[e] += prob.loss.trans[e];
            } else {
                aug.c_trans[e] -= prob.loss.trans[e];
            }
        }
        let gt_on_loss: f64 = prob
            .loss
            .det
            .iter()
            .zip(&prob.gt_flow.det)
            .filter(|(_, &on)| on)
            .map(|(l, _)| l)
            .sum::<f64>()
            + prob
                .loss
                .birth
                .iter()
                .zip(&prob.gt_flow.birth)
                .filter(|(_, &on)| on)
                .map(|(l, _)| l)
                .sum::<f64>()
            + prob
                .loss
                .death
                .iter()
                .zip(&prob.gt_flow.death)
                .filter(|(_, &on)| on)
                .map(|(l, _)| l)
                .sum::<f64>()
            + prob
                .loss
                .trans
                .iter()
                .zip(&prob.gt_flow.trans)
                .filter(|(_, &on)| on)
                .map(|(l, _)| l)
                .sum::<f64>();
        crate::oracle::for_each_flow(&prob.graph, |f| {
            let lhs = flow_cost(&aug, f).unwrap();
            let values = FlowValues::from_flow(&prob.graph, f);
            let rhs = flow_cost(&cg, f).unwrap()
                - prob.loss.weighted_distance(&prob.gt_flow, &values)
                + gt_on_loss;
            assert!((lhs - rhs).abs() < 1e-9);
        })
        .unwrap();
    }

    #[test]
    fn zero_weights_gt_off_turns_track_on() {
        // One detection, ground truth empty, unit losses: augmentation
        // makes the full track cost -3, so the most violated labeling
        // turns it on with violation 3.
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let dets = vec![Detection::new(0, 0, 0, b, 1.0)];
        let graph = build_graph(dets, &GraphParams::learned(1)).unwrap();
        let prob = TrainingProblem::new(graph, &[]).unwrap();
        let w = BlockVector::zeros(BlockLayout::of_graph(&prob.graph));
        let cg = assign_costs(&prob.graph, &w);
        let (label, violation) =
            loss_augmented_infer(&cg, &prob.loss, &prob.gt_flow, InferenceMethod::Exact).unwrap();
        assert_eq!(label.values.det[0], 1.0);
        assert!((violation - 3.0).abs() < 1e-9);
    }

    #[test]
    fn violation_of_gt_labeling_is_zero() {
        let prob = chain_problem(4);
        let w = BlockVector::zeros(BlockLayout::of_graph(&prob.graph));
        let cg = assign_costs(&prob.graph, &w);
        let (_, violation) =
            loss_augmented_infer(&cg, &prob.loss, &prob.gt_flow, InferenceMethod::Exact).unwrap();
        // The returned labeling can only be at least as violated as the
        // ground truth itself, which scores exactly zero.
        assert!(violation >= -1e-9);
    }

    #[test]
    fn chunking_layout() {
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let dets: Vec<Detection> = (0..20)
            .map(|f| Detection::new(f as u64, f, 0, b, 1.0))
            .collect();
        let gts: Vec<GroundTruthBox> = (0..20).map(|f| gt(f, 1, b)).collect();
        let params = GraphParams::learned(1);
        let probs = chunk_sequences(&dets, &gts, &params, 10, 5).unwrap();
        assert_eq!(probs.len(), 3); // starts 0, 5, 10
        for p in &probs {
            p.gt_flow.check_conservation(&p.graph).unwrap();
            assert_eq!(p.graph.num_detections(), 10);
        }

        let probs = chunk_sequences(&dets[..10], &gts[..10], &params, 10, 5).unwrap();
        assert_eq!(probs.len(), 1);
    }

    #[test]
    fn chunking_removes_ambiguous_detections() {
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let far = BBox::new(100.0, 100.0, 120.0, 120.0);
        let dets = vec![
            Detection::new(0, 0, 0, b, 1.0),
            Detection::new(1, 0, 0, far, 1.0),
        ];
        let mut amb = gt(0, -1, b);
        amb.ambiguous = true;
        let probs =
            chunk_sequences(&dets, &[amb], &GraphParams::learned(1), 10, 5).unwrap();
        assert_eq!(probs.len(), 1);
        assert_eq!(probs[0].graph.num_detections(), 1);
        assert_eq!(probs[0].graph.detections[0].id, 1);
    }

    #[test]
    fn training_on_satisfied_problems_terminates_immediately() {
        // Ground truth empty and no negative-cost structure under w = 0:
        // the first aggregated constraint has violation equal to the
        // loss of the most violated labeling, so it is added; afterwards
        // the margin holds and training stops quickly.
        let prob = chain_problem(2);
        let cfg = TrainConfig {
            method: InferenceMethod::Exact,
            ..TrainConfig::default()
        };
        let out = cutting_plane_train(&[prob], &cfg).unwrap();
        assert!(out.trace.iterations.len() <= 100);
        let last = out.trace.iterations.last().unwrap();
        assert!(!last.constraint_added);
        // At termination the exact most-violated constraint sits within
        // eps of the slack.
        assert!(last.violation <= last.xi + cfg.eps);
    }

    #[test]
    fn training_master_objective_is_monotone() {
        let prob = chain_problem(4);
        let cfg = TrainConfig {
            method: InferenceMethod::Exact,
            c: 0.5,
            ..TrainConfig::default()
        };
        let out = cutting_plane_train(&[prob], &cfg).unwrap();
        let objs: Vec<f64> = out
            .trace
            .iterations
            .iter()
            .map(|s| s.master_objective)
            .collect();
        for w in objs.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "master objective dipped: {objs:?}");
        }
        for s in &out.trace.iterations {
            assert!(s.max_stored_violation <= 1e-6);
        }
    }

    #[test]
    fn training_reduces_hamming_on_tiny_separable_problem() {
        // Two detections per frame: the true one (score 1) and a decoy
        // (score -0.2). Learning should instance exactly the true track.
        let b = BBox::new(0.0, 0.0, 20.0, 20.0);
        let decoy_box = BBox::new(60.0, 0.0, 80.0, 20.0);
        let mut dets = Vec::new();
        for f in 0..4u32 {
            dets.push(Detection::new((f * 2) as u64, f, 0, b, 1.0));
            dets.push(Detection::new((f * 2 + 1) as u64, f, 0, decoy_box, -0.2));
        }
        let graph = build_graph(dets, &GraphParams::learned(1)).unwrap();
        let gts: Vec<GroundTruthBox> = (0..4).map(|f| gt(f, 1, b)).collect();
        let prob = TrainingProblem::new(graph, &gts).unwrap();
        assert_eq!(prob.gt_flow.num_active(), 4);

        let cfg = TrainConfig {
            method: InferenceMethod::Exact,
            c: 0.5,
            ..TrainConfig::default()
        };
        let out = cutting_plane_train(std::slice::from_ref(&prob), &cfg).unwrap();
        let predicted = predict_flow(&prob, &out.weights, InferenceMethod::Exact).unwrap();
        let base = hamming_distance(&FlowSolution::zeros(&prob.graph), &prob.gt_flow);
        let trained = hamming_distance(&predicted, &prob.gt_flow);
        assert!(
            trained * 2 <= base,
            "trained {trained} vs baseline {base}"
        );
    }
}
