//! Semi-perspective decoupled heatmaps.
//!
//! Each joint becomes two heatmaps: a uv map on the image plane whose
//! Gaussian spread shrinks with distance, and a uz map whose rows are
//! quantized depth slices and whose columns are image columns.

mod decode;
mod encode;
mod heatmap;
mod quant;
mod stack;

pub use decode::{decode, decode_detailed, DecodeOptions, DecodedJoint, Refinement};
pub use encode::{Amplitude, EncodedJoint, SpdhEncoder};
pub use heatmap::{Heatmap, Peak};
pub use quant::ZQuantization;
pub use stack::{SpdhStack, StackMeta};

use crate::error::Result;

/// Free-function form of [`ZQuantization::new`].
pub fn make_quantization(z_min: f64, z_max: f64, delta_z: f64) -> Result<ZQuantization> {
    ZQuantization::new(z_min, z_max, delta_z)
}
