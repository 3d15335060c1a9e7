//! 3D training augmentation: depth to point cloud, random rigid motion, and
//! reprojection to depth with a min-Z buffer.

use nalgebra::{Isometry3, Matrix4, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{backproject, DepthImage, PinholeIntrinsics};
use crate::joints::JointSet3D;

/// Point the random rotation is applied about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pivot {
    #[default]
    CameraOrigin,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub rot_range_deg: [f64; 2],
    pub trans_range_mm: [f64; 2],
    pub pivot: Pivot,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rot_range_deg: [-5.0, 5.0],
            trans_range_mm: [-80.0, 80.0],
            pivot: Pivot::CameraOrigin,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationAxis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranslationAxis {
    X,
    Z,
}

/// One drawn augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSample {
    pub rot_axis: RotationAxis,
    pub angle_deg: f64,
    pub trans_axis: TranslationAxis,
    pub offset_mm: f64,
}

impl AugmentSample {
    /// Rotation about `pivot` followed by the translation.
    pub fn to_isometry(&self, pivot: &Vector3<f64>) -> Isometry3<f64> {
        let axis = match self.rot_axis {
            RotationAxis::X => Vector3::x_axis(),
            RotationAxis::Y => Vector3::y_axis(),
        };
        let rot = UnitQuaternion::from_axis_angle(&axis, self.angle_deg.to_radians());
        let shift = match self.trans_axis {
            TranslationAxis::X => Vector3::new(self.offset_mm, 0.0, 0.0),
            TranslationAxis::Z => Vector3::new(0.0, 0.0, self.offset_mm),
        };
        Isometry3::from_parts(Translation3::from(pivot + shift), rot)
            * Isometry3::translation(-pivot.x, -pivot.y, -pivot.z)
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("rotation", self.rot_range_deg), ("translation", self.trans_range_mm)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} range [{lo}, {hi}] must be finite with lo <= hi"
                )));
            }
        }
        Ok(())
    }

    /// Fair coin for each axis, then a uniform magnitude within the range.
    pub fn sample(&self, rng: &mut impl Rng) -> AugmentSample {
        let rot_axis = if rng.random::<bool>() {
            RotationAxis::X
        } else {
            RotationAxis::Y
        };
        let angle_deg = uniform(rng, self.rot_range_deg);
        let trans_axis = if rng.random::<bool>() {
            TranslationAxis::X
        } else {
            TranslationAxis::Z
        };
        let offset_mm = uniform(rng, self.trans_range_mm);
        AugmentSample {
            rot_axis,
            angle_deg,
            trans_axis,
            offset_mm,
        }
    }

    pub fn frame_rng(&self, frame_id: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(frame_id))
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Valid pixels backprojected to camera-frame points, row-major.
pub fn depth_to_pointcloud(depth: &DepthImage, k: &PinholeIntrinsics) -> Result<Vec<Vector3<f64>>> {
    Ok(backproject(depth, k)?.points().copied().collect())
}

/// Checks a homogeneous matrix for a proper rigid motion and converts it.
pub fn rigid_from_matrix(m: &Matrix4<f64>) -> Result<Isometry3<f64>> {
    const TOL: f64 = 1e-9;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonRigid("non-finite entries".into()));
    }
    let bottom = m.fixed_view::<1, 4>(3, 0);
    if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > TOL {
        return Err(Error::NonRigid("last row is not (0, 0, 0, 1)".into()));
    }
    let r = m.fixed_view::<3, 3>(0, 0).into_owned();
    let ortho = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
    if ortho > 1e-6 {
        return Err(Error::NonRigid(format!("rotation not orthonormal (residual {ortho:.3e})")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > 1e-6 {
        return Err(Error::NonRigid(format!("rotation determinant {det:.6}, expected +1")));
    }
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let t = m.fixed_view::<3, 1>(0, 3).into_owned();
    Ok(Isometry3::from_parts(Translation3::from(t), rot))
}

/// Maps every point and joint by the same rigid transform.
pub fn apply_rigid(
    cloud: &[Vector3<f64>],
    joints: &JointSet3D,
    transform: &Matrix4<f64>,
) -> Result<(Vec<Vector3<f64>>, JointSet3D)> {
    let iso = rigid_from_matrix(transform)?;
    Ok(apply_isometry(cloud, joints, &iso))
}

pub fn apply_isometry(
    cloud: &[Vector3<f64>],
    joints: &JointSet3D,
    iso: &Isometry3<f64>,
) -> (Vec<Vector3<f64>>, JointSet3D) {
    let moved = cloud
        .iter()
        .map(|p| iso.transform_point(&Point3::from(*p)).coords)
        .collect();
    (moved, joints.transformed(iso))
}

/// Projects points to the nearest pixel, keeping the smallest Z per pixel.
/// Points behind the camera, outside the image or beyond `max_range` are
/// dropped; untouched pixels stay 0.
pub fn pointcloud_to_depth(
    cloud: &[Vector3<f64>],
    k: &PinholeIntrinsics,
    width: usize,
    height: usize,
    max_range: f32,
) -> DepthImage {
    let mut data = vec![0.0f32; width * height];
    for p in cloud {
        if !(p.z > 0.0) || p.z > max_range as f64 {
            continue;
        }
        let u = (k.fx * p.x / p.z + k.cx).round();
        let v = (k.fy * p.y / p.z + k.cy).round();
        if !(u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64) {
            continue;
        }
        let idx = v as usize * width + u as usize;
        let z = p.z as f32;
        if data[idx] == 0.0 || z < data[idx] {
            data[idx] = z;
        }
    }
    DepthImage::from_vec(width, height, max_range, data).expect("z-buffer values within range")
}

/// Result of augmenting one frame.
#[derive(Debug, Clone)]
pub struct AugmentedFrame {
    pub depth: DepthImage,
    pub joints: JointSet3D,
    pub sample: AugmentSample,
    pub transform: Isometry3<f64>,
}

/// Augments one frame with the generator seeded by `spec.seed + frame_id`.
pub fn augment_frame(
    depth: &DepthImage,
    joints: &JointSet3D,
    k: &PinholeIntrinsics,
    spec: &AugmentSpec,
    frame_id: u64,
) -> Result<AugmentedFrame> {
    spec.validate()?;
    let cloud = depth_to_pointcloud(depth, k)?;
    let sample = spec.sample(&mut spec.frame_rng(frame_id));
    let pivot = match spec.pivot {
        Pivot::CameraOrigin => Vector3::zeros(),
        Pivot::Centroid if cloud.is_empty() => Vector3::zeros(),
        Pivot::Centroid => cloud.iter().sum::<Vector3<f64>>() / cloud.len() as f64,
    };
    let transform = sample.to_isometry(&pivot);
    let (moved, joints) = apply_isometry(&cloud, joints, &transform);
    let depth = pointcloud_to_depth(&moved, k, depth.width(), depth.height(), depth.max_range());
    Ok(AugmentedFrame {
        depth,
        joints,
        sample,
        transform,
    })
}
