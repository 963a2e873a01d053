//! Photogrammetric reconstruction of 4D aircraft trajectories from video
//! frames: frame selection, camera models, space resection, relative object
//! positioning, orientation-block fusion and trajectory export.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod formats;
pub mod frames;
pub mod fusion;
pub mod geometry;
pub mod par;
pub mod poly;
pub mod relative;
pub mod resection;
pub mod trajectory;

pub use camera::{CameraError, CameraIntrinsics, ProjectionModel};
pub use geometry::{NavAngles, PhotoAngles, Pose, RotationMatrix, Similarity7, Vec3};
pub use par::Execution;
