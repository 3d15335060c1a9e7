//! Depth-based 3D robot pose representation with semi-perspective decoupled
//! heatmaps (SPDH), plus the camera geometry, synthetic data generation,
//! augmentation and evaluation tooling around it.

pub mod augment;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod joints;
pub mod metrics;
pub mod robot;
pub mod synth;

pub use error::{Error, Result};
pub use joints::{Joint, JointRecord, JointSet3D};
