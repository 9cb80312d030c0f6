//! Solver cost/runtime comparison over a suite of instances, with CSV
//! and SVG output of the cumulative curves.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::graph::GraphParams;
use crate::potentials::{BlockLayout, BlockVector, CostedGraph, WeightVector};
use crate::solvers::TrackMethod;
use crate::synth::{Scenario, SynthConfig};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub instance: String,
    pub method: TrackMethod,
    pub objective: f64,
    pub lower_bound: Option<f64>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Rows of one method in instance order.
    pub fn of_method(&self, method: TrackMethod) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    /// Relative gap of a method's objectives against the lp rows'
    /// lower bounds, one entry per instance.
    pub fn gaps_vs_lp(&self, method: TrackMethod) -> Vec<f64> {
        let lp_rows = self.of_method(TrackMethod::Lp);
        self.of_method(method)
            .iter()
            .filter_map(|row| {
                let lb = lp_rows
                    .iter()
                    .find(|l| l.instance == row.instance)?
                    .lower_bound?;
                if lb == 0.0 && row.objective == 0.0 {
                    return Some(0.0);
                }
                Some((row.objective - lb) / lb.abs())
            })
            .collect()
    }

    pub fn total_time(&self, method: TrackMethod) -> Duration {
        self.of_method(method)
            .iter()
            .map(|r| r.wall_time)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("instance,method,objective,lower_bound,time_ms,cum_objective,cum_time_ms\n");
        for method in TrackMethod::ALL {
            let mut cum_obj = 0.0;
            let mut cum_ms = 0.0;
            for row in self.of_method(method) {
                cum_obj += row.objective;
                let ms = row.wall_time.as_secs_f64() * 1e3;
                cum_ms += ms;
                let lb = row
                    .lower_bound
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.instance, method.name(), row.objective, lb, ms, cum_obj, cum_ms
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::formats::write_file(path, &self.to_csv())
    }

    /// Two-panel SVG: cumulative objective and cumulative wall time per
    /// method across the suite.
    pub fn to_svg(&self) -> String {
        let methods: Vec<TrackMethod> = TrackMethod::ALL
            .into_iter()
            .filter(|&m| !self.of_method(m).is_empty())
            .collect();
        let colors = [
            "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
        ];
        let (w, h, pad) = (960.0, 360.0, 45.0);
        let panel_w = (w - 3.0 * pad) / 2.0;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        );

        let panel = |svg: &mut String,
                         x0: f64,
                         title: &str,
                         series: &dyn Fn(TrackMethod) -> Vec<f64>| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut max_len = 0usize;
            for &m in &methods {
                let ys = series(m);
                max_len = max_len.max(ys.len());
                for y in ys {
                    lo = lo.min(y);
                    hi = hi.max(y);
                }
            }
            if !lo.is_finite() || max_len == 0 {
                return;
            }
            if (hi - lo).abs() < 1e-12 {
                hi = lo + 1.0;
            }
            let sx = |i: usize| {
                x0 + if max_len > 1 {
                    panel_w * i as f64 / (max_len - 1) as f64
                } else {
                    panel_w / 2.0
                }
            };
            let sy = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
            let _ = write!(
                svg,
                "<rect x=\"{x0}\" y=\"{pad}\" width=\"{panel_w}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n\
                 <text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
                h - 2.0 * pad,
                x0 + panel_w / 2.0,
                pad - 12.0
            );
            for (mi, &m) in methods.iter().enumerate() {
                let ys = series(m);
                if ys.is_empty() {
                    continue;
                }
                let pts: Vec<String> = ys
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| format!("{:.2},{:.2}", sx(i), sy(v)))
                    .collect();
                let color = colors[mi % colors.len()];
                let _ = write!(
                    svg,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
                     <text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
                    pts.join(" "),
                    x0 + 6.0,
                    pad + 14.0 + 13.0 * mi as f64,
                    m.name()
                );
            }
        };

        let cum = |vals: Vec<f64>| -> Vec<f64> {
            vals.iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect()
        };
        panel(&mut svg, pad, "cumulative objective", &|m| {
            cum(self.of_method(m).iter().map(|r| r.objective).collect())
        });
        panel(&mut svg, 2.0 * pad + panel_w, "cumulative time (ms)", &|m| {
            cum(self
                .of_method(m)
                .iter()
                .map(|r| r.wall_time.as_secs_f64() * 1e3)
                .collect())
        });
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        crate::formats::write_file(path, &self.to_svg())
    }
}

/// Runs every method on every instance. Timings are single-threaded
/// wall time of the solve call alone.
pub fn bench_run(instances: &[(String, CostedGraph)], methods: &[TrackMethod]) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for (name, cg) in instances {
        for &method in methods {
            let start = Instant::now();
            let sol = method.run(cg)?;
            let wall_time = start.elapsed();
            debug_assert!(sol.lower_bound.map_or(true, |lb| sol.final_cost >= lb - 1e-6));
            report.rows.push(BenchRow {
                instance: name.clone(),
                method,
                objective: sol.final_cost,
                lower_bound: sol.lower_bound,
                wall_time,
            });
        }
    }
    Ok(report)
}

/// Weights used when benchmarking without a trained model: positive
/// score weight, mild birth/death and link costs, and a strong penalty
/// on strictly-overlapping same-class co-activations.
pub fn default_bench_weights(num_classes: usize, relation_dim: usize) -> WeightVector {
    let layout = BlockLayout::new(num_classes, relation_dim);
    let mut w = BlockVector::zeros(layout);
    w.set_birth(-0.4);
    w.set_death(-0.4);
    w.appearance_mut()[0] = 1.0;
    {
        let t = w.transition_mut();
        for bin in 0..8 {
            t[2 * bin] = 0.2; // mild bonus for linking at all
            t[2 * bin + 1] = -0.4; // penalty for weak-overlap links
        }
    }
    for a in 0..num_classes {
        let block = w.pairwise_mut(a, a);
        let d = block.len();
        block[d - 1] = -2.0; // strictly-overlap co-activation penalty
    }
    w
}

/// The shipped benchmark suite: 20 seeded overlap-clutter sequences of
/// 100 frames, sized so the bundled simplex stays comfortable.
pub fn default_suite_configs() -> Vec<SynthConfig> {
    (0..20)
        .map(|i| SynthConfig {
            num_frames: 100,
            num_tracks: 1,
            num_classes: 1,
            detection_noise: 0.8,
            miss_rate: 0.1,
            false_positive_rate: 0.05,
            interaction_scenario: Scenario::OverlapClutter,
            seed: 1000 + i as u64,
            ..SynthConfig::default()
        })
        .collect()
}

/// Graph parameters for the shipped suite; a short occlusion window
/// keeps the relaxations desk-sized.
pub fn default_suite_params() -> GraphParams {
    GraphParams {
        max_gap: 2,
        ..GraphParams::learned(1)
    }
}
