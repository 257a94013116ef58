//! SE(3) pose algebra, point clouds, PCA canonicalization, pose-quality
//! metrics and manual-to-world frame alignment.

mod alignment;
mod cloud;
mod metrics;
mod nn;
mod pca;
mod pose;

pub use alignment::{map_targets_to_world, solve_frame_alignment};
pub use cloud::{
    load_cloud, read_ply, read_xyz, write_ply_ascii, write_ply_binary, write_xyz, Aabb,
    CloudIoError, PointCloud,
};
pub use metrics::{
    chamfer_distance, geodesic_distance, geodesic_distance_from_matrices, part_accuracy,
    rmse_translation, rmse_translations, AccuracyMode, PART_ACCURACY_THRESHOLD,
};
pub use nn::PointIndex;
pub use pca::{pca_canonicalize, principal_extents, Canonicalization};
pub use pose::{random_rotation, Pose, PoseRecordError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("covariance is degenerate (all points coincide)")]
    DegenerateCovariance,
    #[error("point cloud contains non-finite coordinates")]
    NonFinite,
}
