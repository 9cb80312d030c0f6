//! CLEAR-MOT tracking metrics: frame-by-frame optimal matching with
//! identity persistence, accumulated into MOTA, MOTP, recall,
//! precision, mostly-tracked/lost fractions, identity switches and
//! fragmentations.

use std::collections::HashMap;

use crate::geometry::BBox;
use crate::learning::GroundTruthBox;

/// One predicted box of a track file.
#[derive(Debug, Clone)]
pub struct TrackedBox {
    pub frame: u32,
    pub track_id: i64,
    pub class_id: usize,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MotReport {
    pub mota: f64,
    pub motp: f64,
    pub recall: f64,
    pub precision: f64,
    /// Fraction of ground-truth trajectories matched in at least 80%
    /// of their frames.
    pub mt: f64,
    /// Fraction matched in under 20%.
    pub ml: f64,
    pub idsw: usize,
    pub frag: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp: usize,
    pub num_gt: usize,
}

/// Square-matrix Hungarian algorithm, minimizing total cost. Returns
/// the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials over rows/columns with one extra virtual column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![n; n + 1]; // row assigned to column, n = none
    for i in 0..n {
        let mut j0 = n;
        p[j0] = i;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        let mut way = vec![n; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0][j] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut row_to_col = vec![n; n];
    for j in 0..n {
        if p[j] != n {
            row_to_col[p[j]] = j;
        }
    }
    row_to_col
}

const FORBIDDEN: f64 = 1e6;

/// One-to-one matching between predictions and ground-truth boxes of a
/// frame, maximizing total IoU over pairs at or above the threshold.
/// Pairs listed in `prior` are kept as long as they still clear the
/// threshold (identity persistence); the rest are assigned optimally.
/// Returns (pred_index, gt_index) pairs.
pub fn match_frame(
    preds: &[BBox],
    gts: &[BBox],
    threshold: f64,
    prior: &[(usize, usize)],
) -> Vec<(usize, usize)> {
    let mut matches = Vec::new();
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    for &(pi, gi) in prior {
        if pi < preds.len()
            && gi < gts.len()
            && !pred_used[pi]
            && !gt_used[gi]
            && preds[pi].iou(&gts[gi]) >= threshold
        {
            matches.push((pi, gi));
            pred_used[pi] = true;
            gt_used[gi] = true;
        }
    }

    let free_preds: Vec<usize> = (0..preds.len()).filter(|&i| !pred_used[i]).collect();
    let free_gts: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
    let n = free_preds.len().max(free_gts.len());
    if n == 0 {
        matches.sort_by_key(|&(_, g)| g);
        return matches;
    }
    // Pad to square; forbidden pairs cost enough that the assignment
    // maximizes the number of admissible matches first.
    let mut cost = vec![vec![FORBIDDEN; n]; n];
    for (r, &pi) in free_preds.iter().enumerate() {
        for (c, &gi) in free_gts.iter().enumerate() {
            let iou = preds[pi].iou(&gts[gi]);
            if iou >= threshold {
                cost[r][c] = 1.0 - iou;
            }
        }
    }
    let assignment = hungarian(&cost);
    for (r, &c) in assignment.iter().enumerate() {
        if r < free_preds.len() && c < free_gts.len() && cost[r][c] < FORBIDDEN {
            matches.push((free_preds[r], free_gts[c]));
        }
    }
    matches.sort_by_key(|&(_, g)| g);
    matches
}

/// Accumulates CLEAR-MOT metrics over frames. Matching is restricted to
/// equal classes; ambiguous ground-truth boxes must be filtered out by
/// the caller. Fragmentations count tracked-to-untracked transitions
/// between consecutive frames of each trajectory's existence.
pub fn clear_mot(preds: &[TrackedBox], gts: &[GroundTruthBox], threshold: f64) -> MotReport {
    let mut frames: Vec<u32> = preds
        .iter()
        .map(|p| p.frame)
        .chain(gts.iter().map(|g| g.frame))
        .collect();
    frames.sort_unstable();
    frames.dedup();

    // (class, gt track) -> last matched prediction id.
    let mut last_match: HashMap<(usize, i64), i64> = HashMap::new();
    // (class, gt track) -> per-existing-frame matched flags, in order.
    let mut track_status: HashMap<(usize, i64), Vec<bool>> = HashMap::new();

    let mut report = MotReport::default();
    let mut motp_sum = 0.0;

    for &frame in &frames {
        let frame_preds: Vec<&TrackedBox> = preds.iter().filter(|p| p.frame == frame).collect();
        let frame_gts: Vec<&GroundTruthBox> = gts.iter().filter(|g| g.frame == frame).collect();
        report.num_gt += frame_gts.len();

        let mut classes: Vec<usize> = frame_preds
            .iter()
            .map(|p| p.class_id)
            .chain(frame_gts.iter().map(|g| g.class_id))
            .collect();
        classes.sort_unstable();
        classes.dedup();

        for class in classes {
            let cp: Vec<&&TrackedBox> =
                frame_preds.iter().filter(|p| p.class_id == class).collect();
            let cg: Vec<&&GroundTruthBox> =
                frame_gts.iter().filter(|g| g.class_id == class).collect();
            let pred_boxes: Vec<BBox> = cp.iter().map(|p| p.bbox).collect();
            let gt_boxes: Vec<BBox> = cg.iter().map(|g| g.bbox).collect();

            let prior: Vec<(usize, usize)> = cg
                .iter()
                .enumerate()
                .filter_map(|(gi, g)| {
                    let want = *last_match.get(&(class, g.track_id))?;
                    let pi = cp.iter().position(|p| p.track_id == want)?;
                    Some((pi, gi))
                })
                .collect();

            let matches = match_frame(&pred_boxes, &gt_boxes, threshold, &prior);
            let mut gt_matched = vec![false; cg.len()];
            let mut pred_matched = vec![false; cp.len()];
            for &(pi, gi) in &matches {
                gt_matched[gi] = true;
                pred_matched[pi] = true;
                report.tp += 1;
                motp_sum += pred_boxes[pi].iou(&gt_boxes[gi]);
                let key = (class, cg[gi].track_id);
                if let Some(&prev) = last_match.get(&key) {
                    if prev != cp[pi].track_id {
                        report.idsw += 1;
                    }
                }
                last_match.insert(key, cp[pi].track_id);
            }
            report.fp += pred_matched.iter().filter(|&&m| !m).count();
            report.fn_ += gt_matched.iter().filter(|&&m| !m).count();
            for (gi, g) in cg.iter().enumerate() {
                track_status
                    .entry((class, g.track_id))
                    .or_default()
                    .push(gt_matched[gi]);
            }
        }
    }

    let num_tracks = track_status.len();
    let mut mt = 0usize;
    let mut ml = 0usize;
    for status in track_status.values() {
        let matched = status.iter().filter(|&&m| m).count();
        let frac = matched as f64 / status.len() as f64;
        if frac >= 0.8 {
            mt += 1;
        }
        if frac < 0.2 {
            ml += 1;
        }
        for w in status.windows(2) {
            if w[0] && !w[1] {
                report.frag += 1;
            }
        }
    }

    let num_gt = report.num_gt.max(1);
    report.mota = 1.0 - (report.fn_ + report.fp + report.idsw) as f64 / num_gt as f64;
    report.recall = report.tp as f64 / num_gt as f64;
    report.precision = if report.tp + report.fp > 0 {
        report.tp as f64 / (report.tp + report.fp) as f64
    } else {
        1.0
    };
    report.motp = if report.tp > 0 {
        motp_sum / report.tp as f64
    } else {
        0.0
    };
    if num_tracks > 0 {
        report.mt = mt as f64 / num_tracks as f64;
        report.ml = ml as f64 / num_tracks as f64;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(frame: u32, track_id: i64, bbox: BBox) -> GroundTruthBox {
        GroundTruthBox {
            frame,
            track_id,
            class_id: 0,
            bbox,
            ambiguous: false,
        }
    }

    fn pred(frame: u32, track_id: i64, bbox: BBox) -> TrackedBox {
        TrackedBox {
            frame,
            track_id,
            class_id: 0,
            bbox,
            score: 1.0,
        }
    }

    #[test]
    fn match_frame_identical_sets() {
        let boxes = vec![
            BBox::new(0.0, 0.0, 10.0, 10.0),
            BBox::new(20.0, 0.0, 30.0, 10.0),
        ];
        let m = match_frame(&boxes, &boxes, 0.5, &[]);
        assert_eq!(m, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn match_frame_empty_predictions() {
        let gts = vec![BBox::new(0.0, 0.0, 10.0, 10.0)];
        assert!(match_frame(&[], &gts, 0.5, &[]).is_empty());
    }

    #[test]
    fn match_frame_crossing_beats_greedy() {
        // Greedy would grab (p0, g0) with IoU 0.66 and strand p1 with
        // nothing; the optimal pairing is (p0, g1), (p1, g0).
        let p0 = BBox::new(0.0, 0.0, 12.0, 10.0);
        let p1 = BBox::new(2.0, 0.0, 10.0, 10.0);
        let g0 = BBox::new(1.0, 0.0, 11.0, 10.0);
        let g1 = BBox::new(0.0, 0.0, 12.5, 10.0);
        let preds = vec![p0, p1];
        let gts = vec![g0, g1];
        let m = match_frame(&preds, &gts, 0.5, &[]);
        assert_eq!(m.len(), 2);
        // Total IoU of the returned matching beats the greedy one.
        let total: f64 = m.iter().map(|&(p, g)| preds[p].iou(&gts[g])).sum();
        let greedy = preds[0].iou(&gts[0])
            + if preds[1].iou(&gts[1]) >= 0.5 {
                preds[1].iou(&gts[1])
            } else {
                0.0
            };
        assert!(total >= greedy - 1e-12);
        assert_eq!(m, vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn perfect_tracking_report() {
        let b1 = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b2 = BBox::new(30.0, 0.0, 40.0, 10.0);
        let mut preds = Vec::new();
        let mut gts = Vec::new();
        for f in 0..10 {
            preds.push(pred(f, 1, b1));
            preds.push(pred(f, 2, b2));
            gts.push(gt(f, 10, b1));
            gts.push(gt(f, 20, b2));
        }
        let r = clear_mot(&preds, &gts, 0.5);
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.motp, 1.0);
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.idsw, 0);
        assert_eq!(r.frag, 0);
        assert_eq!(r.mt, 1.0);
        assert_eq!(r.ml, 0.0);
        assert_eq!((r.tp, r.fp, r.fn_, r.num_gt), (20, 0, 0, 20));
    }

    #[test]
    fn everything_missed_report() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let gts: Vec<GroundTruthBox> = (0..10).map(|f| gt(f, 1, b)).collect();
        let r = clear_mot(&[], &gts, 0.5);
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.fn_, 10);
        assert_eq!(r.fp, 0);
        assert_eq!(r.idsw, 0);
        assert_eq!(r.ml, 1.0);
    }

    #[test]
    fn identity_swap_counts_once() {
        // One ground-truth track followed by prediction id 1 for five
        // frames and id 2 afterwards: 10 TP, 1 IDSW, no FRAG (the track
        // stays matched throughout), MOTA 0.9.
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let mut preds = Vec::new();
        let gts: Vec<GroundTruthBox> = (0..10).map(|f| gt(f, 5, b)).collect();
        for f in 0..5 {
            preds.push(pred(f, 1, b));
        }
        for f in 5..10 {
            preds.push(pred(f, 2, b));
        }
        let r = clear_mot(&preds, &gts, 0.5);
        assert_eq!(r.idsw, 1);
        assert_eq!(r.frag, 0);
        assert_eq!(r.tp, 10);
        assert_eq!(r.fp, 0);
        assert_eq!(r.fn_, 0);
        assert!((r.mota - 0.9).abs() < 1e-12);
        assert_eq!(r.mt, 1.0);
    }

    #[test]
    fn idsw_invariant_under_pred_relabeling() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let gts: Vec<GroundTruthBox> = (0..6).map(|f| gt(f, 1, b)).collect();
        let preds: Vec<TrackedBox> = (0..6).map(|f| pred(f, 3, b)).collect();
        let relabeled: Vec<TrackedBox> = preds
            .iter()
            .map(|p| TrackedBox {
                track_id: 99,
                ..p.clone()
            })
            .collect();
        let a = clear_mot(&preds, &gts, 0.5);
        let b_ = clear_mot(&relabeled, &gts, 0.5);
        assert_eq!(a.idsw, 0);
        assert_eq!(b_.idsw, 0);
        assert_eq!(a.mota, b_.mota);
    }

    #[test]
    fn smoothing_reduces_fragmentation_on_oscillating_track() {
        // The raw trajectory oscillates off the ground truth every other
        // frame, dropping below the match threshold; the spline pulls it
        // back to the centerline and the fragment count falls.
        let mut raw = Vec::new();
        let mut gts = Vec::new();
        let base = BBox::new(0.0, 40.0, 20.0, 60.0);
        for f in 0..30u32 {
            gts.push(gt(f, 1, base));
            // On-target on even frames, 10px off (IoU 1/3) on odd ones.
            let offset = if f % 2 == 0 { 0.0 } else { 10.0 };
            raw.push((f, base.translated(0.0, offset)));
        }
        let smoothed = crate::spline::smooth_track(&raw);
        let to_preds = |track: &[(u32, BBox)]| -> Vec<TrackedBox> {
            track
                .iter()
                .map(|&(frame, bbox)| TrackedBox {
                    frame,
                    track_id: 1,
                    class_id: 0,
                    bbox,
                    score: 1.0,
                })
                .collect()
        };
        let raw_report = clear_mot(&to_preds(&raw), &gts, 0.5);
        let smooth_report = clear_mot(&to_preds(&smoothed), &gts, 0.5);
        assert!(raw_report.frag > 0, "scenario must fragment raw tracks");
        assert!(
            smooth_report.frag <= raw_report.frag,
            "frag {} -> {}",
            raw_report.frag,
            smooth_report.frag
        );
        assert!(smooth_report.recall > raw_report.recall);
    }

    #[test]
    fn report_identities_hold() {
        // mota and recall recompute exactly from the counts on a messy
        // scenario with misses, false alarms and a switch.
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let far = BBox::new(100.0, 100.0, 115.0, 115.0);
        let mut preds = Vec::new();
        let mut gts = Vec::new();
        for f in 0..8u32 {
            gts.push(gt(f, 1, b));
            if f != 3 {
                preds.push(pred(f, if f < 5 { 1 } else { 2 }, b));
            }
            if f % 3 == 0 {
                preds.push(pred(f, 9, far));
            }
        }
        let r = clear_mot(&preds, &gts, 0.5);
        assert!(
            (r.mota - (1.0 - (r.fn_ + r.fp + r.idsw) as f64 / r.num_gt as f64)).abs() < 1e-12
        );
        assert!((r.recall - r.tp as f64 / r.num_gt as f64).abs() < 1e-12);
        assert!((r.precision - r.tp as f64 / (r.tp + r.fp) as f64).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.motp));
    }

    #[test]
    fn fragmentation_counts_tracked_to_untracked() {
        // Matched on frames 0-2, missed 3-4, matched 5, missed 6:
        // transitions tracked->untracked at 2->3 and 5->6, so FRAG 2.
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let gts: Vec<GroundTruthBox> = (0..7).map(|f| gt(f, 1, b)).collect();
        let mut preds = Vec::new();
        for f in [0u32, 1, 2, 5] {
            preds.push(pred(f, 1, b));
        }
        let r = clear_mot(&preds, &gts, 0.5);
        assert_eq!(r.frag, 2);
        assert_eq!(r.fn_, 3);
    }
}
