use std::path::Path;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

/// Pinhole camera intrinsics for a sensor of `width` x `height` pixels.
///
/// Pixel `(u, v)` denotes the center of column `u`, row `v`; there is no
/// half-pixel offset in the projection formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl PinholeIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Time-of-flight style defaults for a 512x424 depth sensor.
    pub fn desk_default() -> Self {
        Self {
            fx: 365.0,
            fy: 365.0,
            cx: 256.0,
            cy: 212.0,
            width: 512,
            height: 424,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics("zero-sized sensor".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Intrinsics for the same camera after resampling the image to
    /// `new_w` x `new_h`: `fx' = fx * new_w / width`, `cx' = cx * new_w / width`,
    /// and likewise along y.
    pub fn scaled(&self, new_w: usize, new_h: usize) -> Self {
        let sx = new_w as f64 / self.width as f64;
        let sy = new_h as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width: new_w,
            height: new_h,
        }
    }

    /// Projects a camera-frame point (mm) to subpixel coordinates.
    ///
    /// The result may fall outside the image; callers check bounds.
    pub fn project(&self, p: &Vector3<f64>) -> Result<Point2<f64>> {
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera(p.z));
        }
        Ok(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Lifts pixel `(u, v)` to the camera-frame point with Z-depth `depth`.
    #[inline]
    pub fn backproject_pixel(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        )
    }

    /// Direction of the ray through pixel `(u, v)`, scaled so that its Z
    /// component is 1. Ray parameter therefore equals Z-depth.
    #[inline]
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        p.x >= -0.5 && p.y >= -0.5 && p.x < self.width as f64 - 0.5 && p.y < self.height as f64 - 0.5
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).at(path)?;
        let k: Self = serde_json::from_str(&text)?;
        k.validate()?;
        Ok(k)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).at(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(PinholeIntrinsics::new(0.0, 365.0, 256.0, 212.0, 512, 424).is_err());
        assert!(PinholeIntrinsics::new(365.0, -1.0, 256.0, 212.0, 512, 424).is_err());
        assert!(PinholeIntrinsics::new(365.0, 365.0, 512.0, 212.0, 512, 424).is_err());
        assert!(PinholeIntrinsics::new(365.0, 365.0, 256.0, -0.1, 512, 424).is_err());
        assert!(PinholeIntrinsics::desk_default().validate().is_ok());
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let k = PinholeIntrinsics::desk_default();
        let p = k.project(&Vector3::new(0.0, 0.0, 1500.0)).unwrap();
        assert_eq!((p.x, p.y), (k.cx, k.cy));
    }

    #[test]
    fn project_inverts_backproject_example() {
        let k = PinholeIntrinsics::desk_default();
        let p = k.project(&Vector3::new(1000.0, 0.0, 1000.0)).unwrap();
        assert_eq!(p.x, 621.0);
        assert_eq!(p.y, 212.0);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let k = PinholeIntrinsics::desk_default();
        assert!(matches!(
            k.project(&Vector3::new(0.0, 0.0, 0.0)),
            Err(Error::BehindCamera(_))
        ));
        assert!(k.project(&Vector3::new(1.0, 1.0, -10.0)).is_err());
    }

    #[test]
    fn json_schema_matches_camera_file() {
        let k: PinholeIntrinsics = serde_json::from_str(
            r#"{"fx":365.0,"fy":366.0,"cx":256.0,"cy":212.0,"width":512,"height":424}"#,
        )
        .unwrap();
        assert_eq!(k.fy, 366.0);
        assert_eq!(k.width, 512);
    }

    #[test]
    fn scaling_follows_resize_ratio() {
        let k = PinholeIntrinsics::desk_default().scaled(384, 192);
        assert_eq!(k.fx, 365.0 * 0.75);
        assert_eq!(k.cx, 192.0);
        assert!((k.fy - 365.0 * 192.0 / 424.0).abs() < 1e-12);
        assert_eq!((k.width, k.height), (384, 192));
    }
}
