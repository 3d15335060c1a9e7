//! Pinhole camera model, depth maps and depth-to-XYZ conversion.
//!
//! Depth is Z-depth: the distance from the optical center to the plane
//! through the observed point parallel to the image plane.

mod depth;
mod intrinsics;
mod pose;
mod xyz;

pub use depth::{DepthImage, DEFAULT_MAX_RANGE_MM};
pub use intrinsics::PinholeIntrinsics;
pub use pose::RigidPose;
pub use xyz::{backproject, normalize_xyz, NormalizationMode, NormalizationSpec, NormalizedXyz, XyzImage};

use nalgebra::{Point2, Vector3};

use crate::error::Result;

/// Free-function form of [`PinholeIntrinsics::project`].
pub fn project(point: &Vector3<f64>, k: &PinholeIntrinsics) -> Result<Point2<f64>> {
    k.project(point)
}

/// Nearest-neighbor depth resize.
pub fn resize_depth(depth: &DepthImage, new_w: usize, new_h: usize) -> Result<DepthImage> {
    depth.resize_nearest(new_w, new_h)
}
