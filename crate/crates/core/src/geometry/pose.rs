use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform stored as roll/pitch/yaw (`R = Rz(yaw) * Ry(pitch) * Rx(roll)`)
/// and a translation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation_rpy_rad: [f64; 3],
    pub translation_mm: [f64; 3],
}

impl RigidPose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [r, p, y] = self.rotation_rpy_rad;
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.translation_mm)),
            UnitQuaternion::from_euler_angles(r, p, y),
        )
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let (r, p, y) = iso.rotation.euler_angles();
        let t = iso.translation.vector;
        Self {
            rotation_rpy_rad: [r, p, y],
            translation_mm: [t.x, t.y, t.z],
        }
    }

    /// Pose of a camera at `eye` looking at `target`, with image rows running
    /// along `-up`. The camera frame is x right, y down, z forward.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let rot = Rotation3::from_basis_unchecked(&[x, y, z]);
        let iso = Isometry3::from_parts(Translation3::from(eye), UnitQuaternion::from_rotation_matrix(&rot));
        Self::from_isometry(&iso)
    }
}
