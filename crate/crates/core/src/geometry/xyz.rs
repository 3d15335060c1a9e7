use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{DepthImage, PinholeIntrinsics};
use crate::error::{Error, Result};

/// Per-pixel camera-frame coordinates (mm) with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct XyzImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl XyzImage {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<&Vector3<f64>> {
        let i = v * self.width + u;
        self.valid[i].then(|| &self.data[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid points in row-major order.
    pub fn points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.data
            .iter()
            .zip(&self.valid)
            .filter_map(|(p, ok)| ok.then_some(p))
    }
}

/// Converts a depth map into an XYZ image through the inverse intrinsics.
pub fn backproject(depth: &DepthImage, k: &PinholeIntrinsics) -> Result<XyzImage> {
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::DimensionMismatch {
            expected_w: k.width,
            expected_h: k.height,
            got_w: depth.width(),
            got_h: depth.height(),
        });
    }
    let n = depth.width() * depth.height();
    let mut data = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let d = depth.get(u, v);
            if d > 0.0 {
                data.push(k.backproject_pixel(u as f64, v as f64, d as f64));
                valid.push(true);
            } else {
                data.push(Vector3::zeros());
                valid.push(false);
            }
        }
    }
    Ok(XyzImage {
        width: depth.width(),
        height: depth.height(),
        data,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    #[default]
    Fixed,
    PerImage,
}

/// Per-axis affine normalization bounds (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    #[serde(default)]
    pub mode: NormalizationMode,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            lower: [-2000.0, -2000.0, 500.0],
            upper: [2000.0, 2000.0, 3380.0],
            mode: NormalizationMode::Fixed,
        }
    }
}

impl NormalizationSpec {
    pub fn new(lower: [f64; 3], upper: [f64; 3], mode: NormalizationMode) -> Result<Self> {
        let spec = Self { lower, upper, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let (lower, upper) = (self.lower[axis], self.upper[axis]);
            if !(lower < upper) {
                return Err(Error::InvalidBounds { axis, lower, upper });
            }
        }
        Ok(())
    }
}

/// Three-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedXyz {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

/// Maps each channel affinely by its own bounds and clamps to `[0, 1]`.
///
/// In per-image mode the bounds are the min/max over valid pixels; a flat
/// channel maps to 0. Invalid pixels are 0 on every channel.
pub fn normalize_xyz(img: &XyzImage, spec: &NormalizationSpec) -> Result<NormalizedXyz> {
    spec.validate()?;
    let (lower, upper) = match spec.mode {
        NormalizationMode::Fixed => (spec.lower, spec.upper),
        NormalizationMode::PerImage => {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in img.points() {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            (lo, hi)
        }
    };
    let data = img
        .data
        .iter()
        .zip(&img.valid)
        .map(|(p, &ok)| {
            if !ok {
                return [0.0; 3];
            }
            let mut out = [0.0; 3];
            for a in 0..3 {
                let span = upper[a] - lower[a];
                out[a] = if span > 0.0 {
                    ((p[a] - lower[a]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
            out
        })
        .collect();
    Ok(NormalizedXyz {
        width: img.width,
        height: img.height,
        data,
    })
}
