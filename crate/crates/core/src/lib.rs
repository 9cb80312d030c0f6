//! Multi-object tracking as min-cost network flow with quadratic
//! inter-track interactions.
//!
//! The crate builds an association graph over per-frame detections,
//! attaches learnable costs to its flow variables, and solves for the
//! optimal set of tracks with one of several inference routines:
//!
//! * [`solvers::ssp_solve`]: exact successive shortest paths for the
//!   linear objective,
//! * [`solvers::dp_onepass`] / [`solvers::dp_twopass`]: greedy dynamic
//!   programming approximations,
//! * [`solvers::greedy_dp_quadratic`] / [`solvers::twopass_dp_quadratic`]:
//!   the same with pairwise cost updates for the quadratic objective,
//! * [`solvers::lp_relax_solve`]: an LP relaxation with two rounding
//!   heuristics, backed by a bundled bounded-variable simplex.
//!
//! Model parameters are trained end to end with a cutting-plane
//! structured SVM ([`learning`]), tracks are scored with CLEAR-MOT
//! metrics ([`evaluation`]), and a brute-force [`oracle`] provides exact
//! optima for desk-scale instances so every solver can be verified.

pub mod bench;
pub mod error;
pub mod evaluation;
pub mod flow;
pub mod formats;
pub mod geometry;
pub mod graph;
pub mod instances;
pub mod learning;
pub mod oracle;
pub mod pipeline;
pub mod potentials;
pub mod solvers;
pub mod spline;
pub mod synth;

pub use error::Error;
pub use flow::{extract_tracks, tracks_to_flow, FlowSolution, Track};
pub use geometry::BBox;
pub use graph::{
    build_graph, link_candidates, predict_box, spatial_relation, Detection, GraphParams,
    PairwisePair, TrackingGraph, TransitionEdge,
};
pub use potentials::{
    assign_costs, flow_cost, BlockVector, CostedGraph, FeatureVector, WeightVector,
};
pub use solvers::TrackMethod;
