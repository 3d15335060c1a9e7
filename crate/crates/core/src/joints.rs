use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named 3D joint in the camera frame (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub position: Vector3<f64>,
    pub visible: bool,
}

/// Ordered set of named joints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointSet3D {
    pub joints: Vec<Joint>,
}

impl JointSet3D {
    pub fn new(joints: Vec<Joint>) -> Self {
        Self { joints }
    }

    /// Builds a fully visible set from parallel name/position lists.
    pub fn from_positions<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        positions: impl IntoIterator<Item = Vector3<f64>>,
    ) -> Self {
        Self {
            joints: names
                .into_iter()
                .zip(positions)
                .map(|(name, position)| Joint {
                    name: name.into(),
                    position,
                    visible: true,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.joints.iter().map(|j| j.name.as_str())
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.joints.iter().map(|j| &j.position)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.joints.iter().find(|j| !j.position.iter().all(|c| c.is_finite())) {
            Some(j) => Err(Error::NonFiniteJoint {
                name: j.name.clone(),
            }),
            None => Ok(()),
        }
    }

    /// Checks that `other` names the same joints in the same order.
    pub fn check_aligned(&self, other: &JointSet3D) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::JointMismatch(format!(
                "{} joints vs {}",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.joints.iter().zip(&other.joints) {
            if a.name != b.name {
                return Err(Error::JointMismatch(format!("{:?} vs {:?}", a.name, b.name)));
            }
        }
        Ok(())
    }

    pub fn transformed(&self, t: &Isometry3<f64>) -> Self {
        Self {
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    position: t.transform_point(&Point3::from(j.position)).coords,
                    ..j.clone()
                })
                .collect(),
        }
    }
}

/// On-disk joint record: `{name, xyz_mm, visible}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub name: String,
    pub xyz_mm: [f64; 3],
    #[serde(default = "default_true")]
    pub visible: bool,
}

fn default_true() -> bool {
    true
}

impl From<&Joint> for JointRecord {
    fn from(j: &Joint) -> Self {
        Self {
            name: j.name.clone(),
            xyz_mm: [j.position.x, j.position.y, j.position.z],
            visible: j.visible,
        }
    }
}

impl From<JointRecord> for Joint {
    fn from(r: JointRecord) -> Self {
        Self {
            name: r.name,
            position: Vector3::from(r.xyz_mm),
            visible: r.visible,
        }
    }
}

impl JointSet3D {
    pub fn to_records(&self) -> Vec<JointRecord> {
        self.joints.iter().map(JointRecord::from).collect()
    }

    pub fn from_records(records: Vec<JointRecord>) -> Self {
        Self {
            joints: records.into_iter().map(Joint::from).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_checks_names_and_order() {
        let a = JointSet3D::from_positions(["a", "b"], [Vector3::zeros(), Vector3::zeros()]);
        let b = JointSet3D::from_positions(["b", "a"], [Vector3::zeros(), Vector3::zeros()]);
        assert!(a.check_aligned(&a.clone()).is_ok());
        assert!(a.check_aligned(&b).is_err());
        assert!(a.check_aligned(&JointSet3D::default()).is_err());
    }

    #[test]
    fn non_finite_joint_is_reported_by_name() {
        let s = JointSet3D::from_positions(["ok", "bad"], [Vector3::zeros(), Vector3::new(f64::NAN, 0.0, 1.0)]);
        match s.check_finite() {
            Err(Error::NonFiniteJoint { name }) => assert_eq!(name, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn record_defaults_visible() {
        let r: JointRecord = serde_json::from_str(r#"{"name":"j","xyz_mm":[1,2,3]}"#).unwrap();
        assert!(r.visible);
        assert_eq!(Joint::from(r).position, Vector3::new(1.0, 2.0, 3.0));
    }
}
