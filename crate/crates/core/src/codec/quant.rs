use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform slicing of the depth interval `[z_min, z_max]` into rows of the
/// uz heatmap. Slice `i` is centered at `z_min + i * delta_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantFields")]
pub struct ZQuantization {
    z_min: f64,
    z_max: f64,
    delta_z: f64,
    num_slices: usize,
}

#[derive(Deserialize)]
struct QuantFields {
    z_min: f64,
    z_max: f64,
    delta_z: f64,
    #[serde(default)]
    num_slices: Option<usize>,
}

impl TryFrom<QuantFields> for ZQuantization {
    type Error = Error;

    fn try_from(f: QuantFields) -> Result<Self> {
        let q = ZQuantization::new(f.z_min, f.z_max, f.delta_z)?;
        match f.num_slices {
            Some(n) if n != q.num_slices => Err(Error::InvalidQuantization(format!(
                "declared {n} slices but bounds give {}",
                q.num_slices
            ))),
            _ => Ok(q),
        }
    }
}

impl ZQuantization {
    /// `num_slices = round((z_max - z_min) / delta_z)`.
    pub fn new(z_min: f64, z_max: f64, delta_z: f64) -> Result<Self> {
        if !(z_min.is_finite() && z_max.is_finite() && delta_z.is_finite()) {
            return Err(Error::InvalidQuantization("non-finite bound".into()));
        }
        if !(delta_z > 0.0) {
            return Err(Error::InvalidQuantization(format!(
                "delta_z must be positive, got {delta_z}"
            )));
        }
        if !(z_min < z_max) {
            return Err(Error::InvalidQuantization(format!(
                "z_min {z_min} must be below z_max {z_max}"
            )));
        }
        let num_slices = ((z_max - z_min) / delta_z).round() as usize;
        if num_slices < 1 {
            return Err(Error::InvalidQuantization(format!(
                "[{z_min}, {z_max}] with step {delta_z} yields no slices"
            )));
        }
        Ok(Self {
            z_min,
            z_max,
            delta_z,
            num_slices,
        })
    }

    /// 500..3380 mm in 15 mm steps: 192 slices.
    pub fn standard() -> Self {
        Self::new(500.0, 3380.0, 15.0).expect("static parameters are valid")
    }

    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn delta_z(&self) -> f64 {
        self.delta_z
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    #[inline]
    pub fn slice_center(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.delta_z
    }

    /// Metric depth of a (possibly fractional) slice coordinate.
    #[inline]
    pub fn depth_at(&self, slice: f64) -> f64 {
        slice * self.delta_z + self.z_min
    }

    /// Nearest slice index, clamped to the valid range.
    pub fn slice_of(&self, z: f64) -> usize {
        let s = ((z - self.z_min) / self.delta_z).round();
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.num_slices - 1)
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_min && z <= self.z_max
    }
}
