//! Sampled from-region ground truth and a brute-force ray-cast cross-check.

mod depth;
mod gt;
mod raycast;
mod sampling;

pub use depth::{render_depth, render_depth_filtered, DepthBuffer, EMPTY_ID};
pub use gt::{
    compute_gt_pvs, compute_training_pair, gt_from_cameras, gt_id_map_from_cameras, splat_viewpoint,
    training_id_map, TrainingPair,
};
pub use raycast::{intersect_triangle, ray_cast_pvs};
pub use sampling::{
    sample_viewpoints, viewpoint, OracleConfig, SamplingMode, DEFAULT_RESOLUTION_FACTOR, DEFAULT_VIEWPOINTS,
};
