//! End-to-end runs shared by the command line and the test suites:
//! scene synthesis, tracking, training, evaluation, benchmarks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bench::{
    bench_run, default_bench_weights, default_suite_configs, default_suite_params, BenchReport,
};
use crate::error::{Error, Result};
use crate::evaluation::{clear_mot, MotReport, TrackedBox};
use crate::flow::extract_tracks;
use crate::formats;
use crate::formats::ClassMap;
use crate::graph::{build_graph, GraphParams};
use crate::learning::{
    chunk_sequences, cutting_plane_train, GroundTruthBox, InferenceMethod, TrainConfig,
    TrainOutcome, TrainingProblem,
};
use crate::potentials::assign_costs;
use crate::solvers::TrackMethod;
use crate::spline::smooth_track;
use crate::synth::{synth_scene, SynthConfig};

pub const DETECTIONS_FILE: &str = "detections.txt";
pub const GT_FILE: &str = "gt.txt";

/// Generates a scene and writes `detections.txt` and `gt.txt` into the
/// output directory.
pub fn run_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let (dets, gts) = synth_scene(cfg);
    let classes = ClassMap::default_kitti(cfg.num_classes);
    let det_path = out_dir.join(DETECTIONS_FILE);
    let gt_path = out_dir.join(GT_FILE);
    formats::write_detections(&det_path, &dets)?;
    formats::write_gt_labels(&gt_path, &gts, &classes)?;
    Ok((det_path, gt_path))
}

#[derive(Debug, Clone)]
pub struct TrackOptions {
    pub method: TrackMethod,
    pub smooth: bool,
    pub params: GraphParams,
}

#[derive(Debug, Clone)]
pub struct TrackSummary {
    pub num_tracks: usize,
    pub objective: f64,
    pub lower_bound: Option<f64>,
}

/// Tracks a detection file under a weight file and writes the track
/// output. The weight layout fixes the number of classes.
pub fn run_track(
    dets_path: &Path,
    weights_path: &Path,
    opts: &TrackOptions,
    out_path: &Path,
) -> Result<TrackSummary> {
    let dets = formats::parse_detections(dets_path)?;
    let weights = formats::parse_weights(weights_path)?;
    let mut params = opts.params.clone();
    params.num_classes = weights.layout.num_classes;
    params.relation_dim = weights.layout.relation_dim;
    if let Some(bad) = dets.iter().find(|d| d.class_id >= params.num_classes) {
        return Err(Error::Format(format!(
            "detection class {} exceeds the weight file's {} classes",
            bad.class_id, params.num_classes
        )));
    }
    let graph = build_graph(dets, &params)?;
    let cg = assign_costs(&graph, &weights);
    let solution = opts.method.run(&cg)?;
    solution.flow.check_conservation(&graph)?;
    let tracks = extract_tracks(&graph, &solution.flow)?;

    let mut out = Vec::new();
    for (tid, track) in tracks.iter().enumerate() {
        let mut frames: Vec<(u32, crate::geometry::BBox)> = track
            .detections
            .iter()
            .map(|&i| (graph.detections[i].frame, graph.detections[i].bbox))
            .collect();
        if opts.smooth {
            frames = smooth_track(&frames);
        }
        for (&det_idx, &(frame, bbox)) in track.detections.iter().zip(&frames) {
            out.push(TrackedBox {
                frame,
                track_id: tid as i64 + 1,
                class_id: graph.detections[det_idx].class_id,
                bbox,
                score: graph.detections[det_idx].score,
            });
        }
    }
    out.sort_by_key(|t| (t.frame, t.track_id));
    formats::write_tracks(out_path, &out)?;
    Ok(TrackSummary {
        num_tracks: tracks.len(),
        objective: solution.final_cost,
        lower_bound: solution.lower_bound,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub c: f64,
    pub method: InferenceMethod,
    pub params: GraphParams,
    pub chunk_length: u32,
    pub chunk_overlap: u32,
}

impl TrainOptions {
    pub fn new(num_classes: usize) -> Self {
        TrainOptions {
            c: (2.0f64).powi(-7),
            method: InferenceMethod::GreedyDp,
            params: GraphParams::learned(num_classes),
            chunk_length: 10,
            chunk_overlap: 5,
        }
    }
}

/// Loads every sequence directory under `data_dir` (each holding
/// `detections.txt` and `gt.txt`), chunks them into training problems
/// and runs cutting-plane training. Writes the learned weights.
pub fn run_train(data_dir: &Path, opts: &TrainOptions, out_weights: &Path) -> Result<TrainOutcome> {
    let problems = load_training_problems(data_dir, opts)?;
    if problems.is_empty() {
        return Err(Error::Format(format!(
            "no training problems under {}",
            data_dir.display()
        )));
    }
    let cfg = TrainConfig {
        c: opts.c,
        method: opts.method,
        ..TrainConfig::default()
    };
    let outcome = cutting_plane_train(&problems, &cfg)?;
    formats::write_weights(out_weights, &outcome.weights)?;
    Ok(outcome)
}

/// The sequence problems of a training directory, in sorted
/// subdirectory order.
pub fn load_training_problems(data_dir: &Path, opts: &TrainOptions) -> Result<Vec<TrainingProblem>> {
    let classes = ClassMap::default_kitti(opts.params.num_classes);
    let mut seq_dirs: Vec<PathBuf> = std::fs::read_dir(data_dir)
        .map_err(|e| Error::io(data_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join(DETECTIONS_FILE).exists())
        .collect();
    seq_dirs.sort();
    let mut problems = Vec::new();
    for dir in &seq_dirs {
        let dets = formats::parse_detections(&dir.join(DETECTIONS_FILE))?;
        let gts = formats::parse_gt_labels(&dir.join(GT_FILE), &classes)?;
        problems.extend(chunk_sequences(
            &dets,
            &gts,
            &opts.params,
            opts.chunk_length,
            opts.chunk_overlap,
        )?);
    }
    Ok(problems)
}

/// Per-class and combined CLEAR-MOT reports.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub per_class: Vec<(usize, MotReport)>,
    pub combined: MotReport,
}

impl EvalOutcome {
    /// Aligned text table, one row per class plus the combined row.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "class", "MOTA", "MOTP", "Rec", "Prec", "MT", "ML", "IDSW", "FRAG", "FP", "FN"
        );
        let mut row = |name: &str, r: &MotReport| {
            let _ = writeln!(
                out,
                "{:<10} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>6.2} {:>6.2} {:>6} {:>6} {:>6} {:>6}",
                name, r.mota, r.motp, r.recall, r.precision, r.mt, r.ml, r.idsw, r.frag, r.fp, r.fn_
            );
        };
        for (class, report) in &self.per_class {
            row(&format!("class{class}"), report);
        }
        row("all", &self.combined);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "class,mota,motp,recall,precision,mt,ml,idsw,frag,fp,fn,tp,num_gt\n",
        );
        let mut row = |name: &str, r: &MotReport| {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                name, r.mota, r.motp, r.recall, r.precision, r.mt, r.ml, r.idsw, r.frag, r.fp,
                r.fn_, r.tp, r.num_gt
            );
        };
        for (class, report) in &self.per_class {
            row(&class.to_string(), report);
        }
        row("all", &self.combined);
        out
    }
}

/// Scores a track file against ground truth. Ambiguous labels are
/// excluded; predictions covering them are dropped before scoring.
pub fn run_eval(
    tracks_path: &Path,
    gt_path: &Path,
    iou_threshold: f64,
    num_classes: usize,
) -> Result<EvalOutcome> {
    let classes = ClassMap::default_kitti(num_classes);
    let preds_all = formats::parse_tracks(tracks_path)?;
    let gts_all = formats::parse_gt_labels(gt_path, &classes)?;

    let ambiguous: Vec<&GroundTruthBox> = gts_all.iter().filter(|g| g.ambiguous).collect();
    let preds: Vec<TrackedBox> = preds_all
        .into_iter()
        .filter(|p| {
            !ambiguous
                .iter()
                .any(|a| a.frame == p.frame && p.bbox.iou(&a.bbox) >= iou_threshold)
        })
        .collect();
    let gts: Vec<GroundTruthBox> = gts_all.iter().filter(|g| !g.ambiguous).cloned().collect();

    let mut class_ids: Vec<usize> = gts
        .iter()
        .map(|g| g.class_id)
        .chain(preds.iter().map(|p| p.class_id))
        .collect();
    class_ids.sort_unstable();
    class_ids.dedup();

    let per_class = class_ids
        .into_iter()
        .map(|class| {
            let p: Vec<TrackedBox> = preds.iter().filter(|t| t.class_id == class).cloned().collect();
            let g: Vec<GroundTruthBox> =
                gts.iter().filter(|t| t.class_id == class).cloned().collect();
            (class, clear_mot(&p, &g, iou_threshold))
        })
        .collect();
    let combined = clear_mot(&preds, &gts, iou_threshold);
    Ok(EvalOutcome {
        per_class,
        combined,
    })
}

/// Builds the shipped benchmark suite in memory: costed graphs from
/// seeded overlap-clutter scenes under the default bench weights.
pub fn default_bench_instances() -> Result<Vec<(String, crate::potentials::CostedGraph)>> {
    let params = default_suite_params();
    let weights = default_bench_weights(params.num_classes, params.relation_dim);
    default_suite_configs()
        .iter()
        .map(|cfg| {
            let (dets, _) = synth_scene(cfg);
            let graph = build_graph(dets, &params)?;
            Ok((format!("seq{:02}", cfg.seed - 1000), assign_costs(&graph, &weights)))
        })
        .collect()
}

/// Runs the benchmark over a suite directory (sequence subdirectories
/// with detection files) or over the shipped default suite, writing CSV
/// and SVG reports.
pub fn run_bench(
    suite_dir: Option<&Path>,
    methods: &[TrackMethod],
    weights_path: Option<&Path>,
    out_csv: &Path,
) -> Result<BenchReport> {
    let instances = match suite_dir {
        None => default_bench_instances()?,
        Some(dir) => {
            let params = default_suite_params();
            let weights = match weights_path {
                Some(p) => formats::parse_weights(p)?,
                None => default_bench_weights(params.num_classes, params.relation_dim),
            };
            let mut params = params;
            params.num_classes = weights.layout.num_classes;
            params.relation_dim = weights.layout.relation_dim;
            let mut seq_dirs: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_dir() && p.join(DETECTIONS_FILE).exists())
                .collect();
            seq_dirs.sort();
            if seq_dirs.is_empty() {
                return Err(Error::Format(format!(
                    "no sequences under {}",
                    dir.display()
                )));
            }
            let mut instances = Vec::new();
            for d in &seq_dirs {
                let dets = formats::parse_detections(&d.join(DETECTIONS_FILE))?;
                let graph = build_graph(dets, &params)?;
                let name = d
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "seq".into());
                instances.push((name, assign_costs(&graph, &weights)));
            }
            instances
        }
    };
    let report = bench_run(&instances, methods)?;
    report.write_csv(out_csv)?;
    report.write_svg(&out_csv.with_extension("svg"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn synth_track_eval_round() {
        let dir = tempdir().unwrap();
        let cfg = SynthConfig {
            num_frames: 12,
            num_tracks: 2,
            miss_rate: 0.0,
            false_positive_rate: 0.0,
            detection_noise: 0.5,
            seed: 11,
            ..SynthConfig::default()
        };
        let (det_path, gt_path) = run_synth(&cfg, dir.path()).unwrap();

        let weights = default_bench_weights(1, 8);
        let wpath = dir.path().join("weights.txt");
        formats::write_weights(&wpath, &weights).unwrap();

        let out = dir.path().join("tracks.txt");
        let summary = run_track(
            &det_path,
            &wpath,
            &TrackOptions {
                method: TrackMethod::Dp1q,
                smooth: false,
                params: GraphParams::learned(1),
            },
            &out,
        )
        .unwrap();
        assert!(summary.num_tracks >= 1);

        let eval = run_eval(&out, &gt_path, 0.5, 1).unwrap();
        assert!(eval.combined.recall > 0.8, "recall {}", eval.combined.recall);
        assert!(eval.combined.mota > 0.5, "mota {}", eval.combined.mota);
        let table = eval.table();
        assert!(table.contains("MOTA") && table.contains("all"));
    }
}
