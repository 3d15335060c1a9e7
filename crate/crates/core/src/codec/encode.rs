use std::f64::consts::PI;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};

use super::{Heatmap, SpdhStack, ZQuantization};
use crate::error::{Error, Result};
use crate::geometry::PinholeIntrinsics;
use crate::joints::JointSet3D;

/// Beyond this exponent `exp(-x)` underflows to exactly 0 in f64.
const EXP_UNDERFLOW: f64 = 746.0;

/// Heatmap amplitude convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    /// Every encoded map peaks at exactly 1.0.
    #[default]
    Peak,
    /// Unnormalized Gaussian scaled by `1 / (2 pi sigma)`.
    Density,
}

/// Per-joint result of encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedJoint {
    /// Subpixel projection, when the joint is in front of the camera.
    pub uv: Option<Point2<f64>>,
    /// Gaussian stddev of the uv map in pixels.
    pub sigma_px: f64,
    pub encodable: bool,
}

/// Encodes camera-frame joints into paired uv / uz heatmaps.
///
/// `k` must describe the heatmap resolution: uv maps are
/// `k.height x k.width`, uz maps are `num_slices x k.width`.
#[derive(Debug, Clone)]
pub struct SpdhEncoder {
    pub k: PinholeIntrinsics,
    pub quant: ZQuantization,
    pub sigma_m: f64,
    pub amplitude: Amplitude,
}

impl SpdhEncoder {
    pub fn new(k: PinholeIntrinsics, quant: ZQuantization, sigma_m: f64) -> Result<Self> {
        k.validate()?;
        if !(sigma_m > 0.0 && sigma_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_m must be positive, got {sigma_m}"
            )));
        }
        Ok(Self {
            k,
            quant,
            sigma_m,
            amplitude: Amplitude::Peak,
        })
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Perspective-aware pixel stddev: `sigma_m * fx / z`.
    #[inline]
    pub fn sigma_px(&self, z: f64) -> f64 {
        self.sigma_m * self.k.fx / z
    }

    /// A joint is encodable when its depth lies in the quantized range and
    /// its projection lands inside the image.
    pub fn inspect(&self, p: &Vector3<f64>) -> EncodedJoint {
        let uv = self.k.project(p).ok();
        let encodable = self.quant.contains(p.z) && uv.is_some_and(|uv| self.k.contains(&uv));
        EncodedJoint {
            uv,
            sigma_px: if p.z > 0.0 { self.sigma_px(p.z) } else { f64::NAN },
            encodable,
        }
    }

    /// uv heatmaps, one per joint, plus the per-joint encodability flags.
    pub fn encode_uv(&self, joints: &JointSet3D) -> Result<(Vec<Heatmap>, Vec<bool>)> {
        joints.check_finite()?;
        let (w, h) = (self.k.width, self.k.height);
        let mut maps = Vec::with_capacity(joints.len());
        let mut flags = Vec::with_capacity(joints.len());
        for joint in &joints.joints {
            let info = self.inspect(&joint.position);
            flags.push(info.encodable);
            match info.uv.filter(|_| info.encodable) {
                Some(uv) => maps.push(self.uv_map(uv, info.sigma_px, w, h)),
                None => maps.push(Heatmap::zeros(w, h)),
            }
        }
        Ok((maps, flags))
    }

    fn uv_map(&self, uv: Point2<f64>, sigma: f64, w: usize, h: usize) -> Heatmap {
        let gx = gaussian_1d(uv.x, sigma, w);
        let gy = gaussian_1d(uv.y, sigma, h);
        let (sx, sy) = match self.amplitude {
            Amplitude::Peak => (max_of(&gx), max_of(&gy)),
            Amplitude::Density => (1.0, 2.0 * PI * sigma),
        };
        let mut data = Vec::with_capacity(w * h);
        for y in &gy {
            let ry = y / sy;
            data.extend(gx.iter().map(|x| (x / sx) * ry));
        }
        Heatmap {
            width: w,
            height: h,
            data,
        }
    }

    /// uz heatmaps: cell `(u, i)` holds a Gaussian of the metric distance
    /// between the joint's `(X, Z)` and the point `((u - cx) * Z_i / fx, Z_i)`
    /// where `Z_i` is the center of slice `i`.
    pub fn encode_uz(&self, joints: &JointSet3D) -> Result<(Vec<Heatmap>, Vec<bool>)> {
        joints.check_finite()?;
        let mut maps = Vec::with_capacity(joints.len());
        let mut flags = Vec::with_capacity(joints.len());
        for joint in &joints.joints {
            let encodable = self.inspect(&joint.position).encodable;
            flags.push(encodable);
            if encodable {
                maps.push(self.uz_map(&joint.position));
            } else {
                maps.push(Heatmap::zeros(self.k.width, self.quant.num_slices()));
            }
        }
        Ok((maps, flags))
    }

    fn uz_map(&self, p: &Vector3<f64>) -> Heatmap {
        let (w, rows) = (self.k.width, self.quant.num_slices());
        let two_var = 2.0 * self.sigma_m * self.sigma_m;
        let mut map = Heatmap::zeros(w, rows);
        for i in 0..rows {
            let zi = self.quant.slice_center(i);
            let dz2 = (zi - p.z) * (zi - p.z);
            if dz2 / two_var > EXP_UNDERFLOW {
                continue;
            }
            let row = &mut map.data[i * w..(i + 1) * w];
            for (u, cell) in row.iter_mut().enumerate() {
                let px = (u as f64 - self.k.cx) * zi / self.k.fx;
                let d2 = (px - p.x) * (px - p.x) + dz2;
                *cell = (-d2 / two_var).exp();
            }
        }
        match self.amplitude {
            Amplitude::Peak => {
                let m = map.max_value();
                if m > 0.0 {
                    map.data.iter_mut().for_each(|v| *v /= m);
                }
            }
            Amplitude::Density => map.scale(1.0 / (2.0 * PI * self.sigma_m)),
        }
        map
    }

    /// Full stack plus per-joint encodability.
    pub fn encode(&self, joints: &JointSet3D) -> Result<(SpdhStack, Vec<bool>)> {
        let (uv_maps, flags) = self.encode_uv(joints)?;
        let (uz_maps, _) = self.encode_uz(joints)?;
        let stack = SpdhStack {
            uv_maps,
            uz_maps,
            quant: self.quant,
            sigma_m: self.sigma_m,
            joint_names: joints.names().map(str::to_owned).collect(),
        };
        Ok((stack, flags))
    }
}

/// Unnormalized 1D Gaussian sampled at integer positions `0..len`.
fn gaussian_1d(center: f64, sigma: f64, len: usize) -> Vec<f64> {
    let two_var = 2.0 * sigma * sigma;
    (0..len)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / two_var).exp()
        })
        .collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Peak;
    use crate::joints::Joint;

    fn encoder() -> SpdhEncoder {
        let k = PinholeIntrinsics::new(365.0, 365.0, 192.0, 96.0, 384, 192).unwrap();
        SpdhEncoder::new(k, ZQuantization::standard(), 50.0).unwrap()
    }

    fn one(p: Vector3<f64>) -> JointSet3D {
        JointSet3D::from_positions(["j"], [p])
    }

    #[test]
    fn sigma_example() {
        let e = encoder();
        assert_eq!(e.sigma_px(1825.0), 10.0);
        assert_eq!(e.sigma_px(3650.0), 5.0);
    }

    #[test]
    fn joint_in_front_of_range_gets_zero_map() {
        let e = encoder();
        let (maps, flags) = e.encode_uv(&one(Vector3::new(0.0, 0.0, 400.0))).unwrap();
        assert!(!flags[0]);
        assert!(maps[0].data.iter().all(|v| *v == 0.0));
        let (uz, _) = e.encode_uz(&one(Vector3::new(0.0, 0.0, 400.0))).unwrap();
        assert!(uz[0].data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn joint_outside_image_gets_zero_map() {
        let e = encoder();
        let (maps, flags) = e.encode_uv(&one(Vector3::new(3000.0, 0.0, 1000.0))).unwrap();
        assert!(!flags[0]);
        assert_eq!(maps[0].max_value(), 0.0);
    }

    #[test]
    fn non_finite_joint_is_rejected() {
        let e = encoder();
        assert!(e.encode_uv(&one(Vector3::new(f64::NAN, 0.0, 1000.0))).is_err());
        assert!(e.encode_uz(&one(Vector3::new(0.0, f64::INFINITY, 1000.0))).is_err());
    }

    #[test]
    fn uv_peak_is_one_at_projection() {
        let e = encoder();
        let (maps, _) = e.encode_uv(&one(Vector3::new(100.0, -50.0, 1500.0))).unwrap();
        let p = maps[0].argmax();
        let uv = e.k.project(&Vector3::new(100.0, -50.0, 1500.0)).unwrap();
        assert_eq!(p.value, 1.0);
        assert_eq!(p.col, uv.x.round() as usize);
        assert_eq!(p.row, uv.y.round() as usize);
    }

    #[test]
    fn uv_map_has_requested_spread() {
        let e = encoder();
        // joint on a pixel center at Z = 1825 mm: sigma = 10 px
        let z = 1825.0;
        let p = Vector3::new(8.0 * z / 365.0, 0.0, z);
        let (maps, _) = e.encode_uv(&one(p)).unwrap();
        let m = &maps[0];
        assert_eq!(m.get(200, 96), 1.0);
        assert!((m.get(210, 96) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((m.get(200, 86) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn uz_peak_on_axis_slice_center() {
        let e = encoder();
        let z = e.quant.slice_center(40);
        let (maps, _) = e.encode_uz(&one(Vector3::new(0.0, 123.0, z))).unwrap();
        let p = maps[0].argmax();
        assert_eq!((p.col, p.row, p.value), (192, 40, 1.0));
    }

    #[test]
    fn uz_cell_one_sigma_away_in_metric_plane() {
        // fx = 364 puts columns 5 mm apart at slice 88 (Z = 1820 mm)
        let k = PinholeIntrinsics::new(364.0, 364.0, 192.0, 96.0, 384, 192).unwrap();
        let e = SpdhEncoder::new(k, ZQuantization::standard(), 50.0).unwrap();
        let (maps, _) = e.encode_uz(&one(Vector3::new(50.0, 0.0, 1820.0))).unwrap();
        let m = &maps[0];
        assert_eq!(m.argmax(), Peak { col: 202, row: 88, value: 1.0 });
        assert!((m.get(192, 88) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn density_amplitude_uses_prefactor() {
        let e = encoder().with_amplitude(Amplitude::Density);
        let z = 1825.0;
        let (maps, _) = e.encode_uv(&one(Vector3::new(0.0, 0.0, z))).unwrap();
        let expect = 1.0 / (2.0 * PI * 10.0);
        assert!((maps[0].get(192, 96) - expect).abs() < 1e-15);
        let (uz, _) = e.encode_uz(&one(Vector3::new(0.0, 0.0, 1820.0))).unwrap();
        assert!((uz[0].max_value() - 1.0 / (2.0 * PI * 50.0)).abs() < 1e-15);
    }

    #[test]
    fn stack_shapes() {
        let e = encoder();
        let joints = JointSet3D::new(vec![
            Joint {
                name: "a".into(),
                position: Vector3::new(0.0, 0.0, 1000.0),
                visible: true,
            },
            Joint {
                name: "b".into(),
                position: Vector3::new(0.0, 0.0, 100.0),
                visible: true,
            },
        ]);
        let (stack, flags) = e.encode(&joints).unwrap();
        assert_eq!(flags, vec![true, false]);
        assert_eq!(stack.uv_maps.len(), 2);
        assert_eq!(stack.uz_maps[0].height, 192);
        assert_eq!(stack.uz_maps[0].width, stack.uv_maps[0].width);
        assert_eq!(stack.uv_maps[0].height, stack.uz_maps[0].height);
        assert_eq!(stack.joint_names, vec!["a", "b"]);
    }

    #[test]
    fn invalid_sigma_rejected() {
        let k = PinholeIntrinsics::desk_default();
        assert!(SpdhEncoder::new(k, ZQuantization::standard(), 0.0).is_err());
        assert!(SpdhEncoder::new(k, ZQuantization::standard(), f64::NAN).is_err());
    }
}
