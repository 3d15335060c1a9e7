use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SpdhStack;
use crate::error::{Error, Result};
use crate::geometry::PinholeIntrinsics;
use crate::joints::{Joint, JointSet3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    /// Integer argmax.
    #[default]
    None,
    /// Per-axis parabola through the 3x3 neighborhood of the peak.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub peak_threshold: f64,
    #[serde(default)]
    pub refinement: Refinement,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            peak_threshold: 0.1,
            refinement: Refinement::None,
        }
    }
}

/// Per-joint decoding detail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedJoint {
    pub u: f64,
    pub v: f64,
    /// Fractional slice coordinate of the uz peak.
    pub slice: f64,
    pub peak_uv: f64,
    pub peak_uz: f64,
    pub position: Vector3<f64>,
    /// The refined image location fell outside the image and was clamped.
    pub clamped: bool,
    pub visible: bool,
}

/// Recovers metric joints from heatmap maxima.
///
/// The uv peak gives `(u, v)`, the uz peak row `z` gives
/// `Z = z * delta_z + z_min`, and `(u, v, Z)` is lifted through `k`.
pub fn decode_detailed(
    stack: &SpdhStack,
    k: &PinholeIntrinsics,
    opts: &DecodeOptions,
) -> Result<Vec<DecodedJoint>> {
    stack.validate()?;
    let (w, h) = stack.uv_shape();
    if w != k.width || h != k.height {
        return Err(Error::ShapeMismatch(format!(
            "uv maps are {w}x{h} but intrinsics describe {}x{}",
            k.width, k.height
        )));
    }
    let last_slice = (stack.quant.num_slices() - 1) as f64;
    let out = stack
        .uv_maps
        .iter()
        .zip(&stack.uz_maps)
        .map(|(uv, uz)| {
            let puv = uv.argmax();
            let puz = uz.argmax();
            let (mut u, mut v) = (puv.col as f64, puv.row as f64);
            let mut slice = puz.row as f64;
            if opts.refinement == Refinement::Quadratic {
                let (du, dv) = uv.quadratic_offset(&puv);
                u += du;
                v += dv;
                slice += uz.quadratic_offset(&puz).1;
            }
            let cu = u.clamp(0.0, (w - 1) as f64);
            let cv = v.clamp(0.0, (h - 1) as f64);
            let clamped = cu != u || cv != v;
            let slice = slice.clamp(0.0, last_slice);
            let z = stack.quant.depth_at(slice);
            DecodedJoint {
                u: cu,
                v: cv,
                slice,
                peak_uv: puv.value,
                peak_uz: puz.value,
                position: k.backproject_pixel(cu, cv, z),
                clamped,
                visible: puv.value >= opts.peak_threshold && puz.value >= opts.peak_threshold,
            }
        })
        .collect();
    Ok(out)
}

/// Decoded joints; those whose peaks fall below the threshold are invisible.
pub fn decode(stack: &SpdhStack, k: &PinholeIntrinsics, opts: &DecodeOptions) -> Result<JointSet3D> {
    let detail = decode_detailed(stack, k, opts)?;
    Ok(JointSet3D::new(
        detail
            .into_iter()
            .zip(&stack.joint_names)
            .map(|(d, name)| Joint {
                name: name.clone(),
                position: d.position,
                visible: d.visible,
            })
            .collect(),
    ))
}
