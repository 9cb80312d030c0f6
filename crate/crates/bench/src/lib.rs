//! Instance builders shared by the criterion benchmarks.

use quadtrack_core::bench::{default_bench_weights, default_suite_params};
use quadtrack_core::graph::build_graph;
use quadtrack_core::potentials::{assign_costs, CostedGraph};
use quadtrack_core::synth::{Scenario, SynthConfig};

/// A clutter scene of the given length, costed with the default bench
/// weights.
pub fn clutter_instance(num_frames: u32, seed: u64) -> CostedGraph {
    let cfg = SynthConfig {
        num_frames,
        num_tracks: 1,
        num_classes: 1,
        detection_noise: 1.5,
        miss_rate: 0.1,
        false_positive_rate: 0.05,
        interaction_scenario: Scenario::OverlapClutter,
        seed,
        ..SynthConfig::default()
    };
    let params = default_suite_params();
    let (dets, _) = quadtrack_core::synth::synth_scene(&cfg);
    let graph = build_graph(dets, &params).expect("synthetic scene builds");
    assign_costs(&graph, &default_bench_weights(1, 8))
}
