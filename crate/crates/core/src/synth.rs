//! Seeded synthetic tracking scenes: constant-velocity ground-truth
//! tracks with jittered detections, misses, false positives and
//! optional interaction scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::graph::Detection;
use crate::learning::GroundTruthBox;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreModel {
    pub mean_true: f64,
    pub mean_false: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Independent tracks only.
    None,
    /// A duplicate jittered detection per ground-truth box per frame,
    /// scored between the true and false distributions.
    OverlapClutter,
    /// Tracks spawn in pairs moving in lockstep, the partner one class
    /// over.
    CoOccurrence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_frames: u32,
    pub num_tracks: usize,
    pub num_classes: usize,
    pub image_size: [f64; 2],
    /// Std of the Gaussian jitter on detection box centers (pixels).
    pub detection_noise: f64,
    pub miss_rate: f64,
    pub false_positive_rate: f64,
    pub score_model: ScoreModel,
    pub interaction_scenario: Scenario,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_frames: 30,
            num_tracks: 3,
            num_classes: 1,
            image_size: [640.0, 360.0],
            detection_noise: 1.0,
            miss_rate: 0.05,
            false_positive_rate: 0.05,
            score_model: ScoreModel {
                mean_true: 1.5,
                mean_false: -0.2,
                std: 0.3,
            },
            interaction_scenario: Scenario::None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> crate::error::Result<Self> {
        toml::from_str(text).map_err(|e| crate::error::Error::Format(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

struct TrackState {
    class_id: usize,
    pos: (f64, f64), // box center
    vel: (f64, f64),
    size: (f64, f64),
}

/// Generates one scene. The same config (including seed) always
/// produces identical output; detections carry the true track velocity
/// as their motion estimate.
pub fn synth_scene(cfg: &SynthConfig) -> (Vec<Detection>, Vec<GroundTruthBox>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (width, height) = (cfg.image_size[0], cfg.image_size[1]);
    let noise = Normal::new(0.0, cfg.detection_noise.max(1e-9)).unwrap();
    let score_true = Normal::new(cfg.score_model.mean_true, cfg.score_model.std.max(1e-9)).unwrap();
    let score_false =
        Normal::new(cfg.score_model.mean_false, cfg.score_model.std.max(1e-9)).unwrap();
    let score_clutter = Normal::new(
        (cfg.score_model.mean_true + cfg.score_model.mean_false) / 2.0,
        cfg.score_model.std.max(1e-9),
    )
    .unwrap();

    let mut tracks: Vec<TrackState> = Vec::new();
    let mut t = 0usize;
    while tracks.len() < cfg.num_tracks {
        let class_id = t % cfg.num_classes.max(1);
        let size = (rng.gen_range(30.0..60.0), rng.gen_range(30.0..60.0));
        let pos = (
            rng.gen_range(size.0..width - size.0),
            rng.gen_range(size.1..height - size.1),
        );
        let vel = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        tracks.push(TrackState {
            class_id,
            pos,
            vel,
            size,
        });
        if cfg.interaction_scenario == Scenario::CoOccurrence && tracks.len() < cfg.num_tracks {
            // Lockstep partner one class over, offset to the side.
            let off = (
                rng.gen_range(60.0..120.0),
                rng.gen_range(-20.0..20.0),
            );
            tracks.push(TrackState {
                class_id: (class_id + 1) % cfg.num_classes.max(1),
                pos: (pos.0 + off.0, pos.1 + off.1),
                vel,
                size: (rng.gen_range(30.0..60.0), rng.gen_range(30.0..60.0)),
            });
        }
        t += 1;
    }

    let mut detections = Vec::new();
    let mut gts = Vec::new();
    let mut next_det_id = 0u64;
    for frame in 0..cfg.num_frames {
        for (tid, track) in tracks.iter_mut().enumerate() {
            let bbox = BBox::new(
                track.pos.0 - track.size.0 / 2.0,
                track.pos.1 - track.size.1 / 2.0,
                track.pos.0 + track.size.0 / 2.0,
                track.pos.1 + track.size.1 / 2.0,
            );
            gts.push(GroundTruthBox {
                frame,
                track_id: tid as i64,
                class_id: track.class_id,
                bbox,
                ambiguous: false,
            });

            let emit = |rng: &mut ChaCha8Rng, score: f64, vel: (f64, f64), id: &mut u64| {
                let dx = noise.sample(rng);
                let dy = noise.sample(rng);
                let dw = noise.sample(rng) * 0.5;
                let dh = noise.sample(rng) * 0.5;
                let w = (bbox.width() + dw).max(4.0);
                let h = (bbox.height() + dh).max(4.0);
                let cx = track.pos.0 + dx;
                let cy = track.pos.1 + dy;
                let mut det = Detection::new(
                    *id,
                    frame,
                    track.class_id,
                    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
                    score,
                );
                det.velocity = vel;
                *id += 1;
                det
            };

            // Draw the randomness in a fixed order so the stream stays
            // aligned regardless of the miss decision.
            let missed = rng.gen_bool(cfg.miss_rate.clamp(0.0, 1.0));
            let score = score_true.sample(&mut rng);
            let det = emit(&mut rng, score, track.vel, &mut next_det_id);
            if !missed {
                detections.push(det);
            }

            if cfg.interaction_scenario == Scenario::OverlapClutter {
                let score = score_clutter.sample(&mut rng);
                let det = emit(&mut rng, score, track.vel, &mut next_det_id);
                detections.push(det);
            }

            // False positives, one lottery per track slot per frame.
            if rng.gen_bool(cfg.false_positive_rate.clamp(0.0, 1.0)) {
                let w = rng.gen_range(30.0..60.0);
                let h = rng.gen_range(30.0..60.0);
                let cx = rng.gen_range(w / 2.0..width - w / 2.0);
                let cy = rng.gen_range(h / 2.0..height - h / 2.0);
                let score = score_false.sample(&mut rng);
                let mut det = Detection::new(
                    next_det_id,
                    frame,
                    rng.gen_range(0..cfg.num_classes.max(1)),
                    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
                    score,
                );
                det.velocity = (0.0, 0.0);
                next_det_id += 1;
                detections.push(det);
            }

            // Advance with reflective bounce off the image boundary.
            track.pos.0 += track.vel.0;
            track.pos.1 += track.vel.1;
            if track.pos.0 < track.size.0 / 2.0 || track.pos.0 > width - track.size.0 / 2.0 {
                track.vel.0 = -track.vel.0;
                track.pos.0 += 2.0 * track.vel.0;
            }
            if track.pos.1 < track.size.1 / 2.0 || track.pos.1 > height - track.size.1 / 2.0 {
                track.vel.1 = -track.vel.1;
                track.pos.1 += 2.0 * track.vel.1;
            }
        }
    }

    detections.sort_by_key(|d| (d.frame, d.id));
    // Ids must be unique; reassign densely after the miss gaps.
    for (i, d) in detections.iter_mut().enumerate() {
        d.id = i as u64;
    }
    (detections, gts)
}
