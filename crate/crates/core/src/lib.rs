//! Geometry and planning core for sculpting point-cloud clay with a parallel gripper.
//!
//! Everything here is `no_std` + `alloc` and deterministic given its inputs and seed.
//! File formats, the CLI, and parallel candidate evaluation live in the `claysculpt` crate.

#![no_std]

extern crate alloc;

pub mod chamfer;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod kdtree;
pub mod kmeans;
pub mod planner;
pub mod preprocess;
pub mod registration;
pub mod sampler;
pub mod sampling;
pub mod seed;
pub mod shapes;
pub mod sim;
pub mod transform;

pub use dynamics::{apply_grasp, AnalyticDynamics, Constraints, Dynamics, GraspAction, GripperModel};
pub use planner::{
    evaluate_candidates, plan_step, run_sculpt_loop, Environment, PlanStep, PlannerConfig, SamplerKind, SculptRun,
};
pub use preprocess::{preprocess_pipeline, ClayShell, Label, PreprocessConfig, RawScan};
pub use registration::{fuse_views, icp_refine, ransac_align, RegistrationResult};
pub use sampler::{geometric_sample, pair_clusters, random_sample, PairedClusters, SamplerConfig};
pub use sim::{env_step, make_initial_clay, make_target, synth_scan, EnvConfig, ShapeKind, SimEnv, TargetShape};
pub use chamfer::{chamfer_distance, chamfer_mean, nearest_neighbor, IncrementalChamfer};
pub use error::{Error, Result};
pub use geom::{Aabb, Point3, PointCloud};
pub use kmeans::{kmeans, ClusterSet};
pub use sampling::{downsample_random, farthest_point_sample, knn_group};
pub use transform::{rotate_z, RigidTransform};
