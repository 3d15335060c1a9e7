//! Articulated robot description and forward kinematics.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::geometry::RigidPose;
use crate::joints::JointSet3D;

const BUNDLED_CHAIN: &str = include_str!("../data/dual_arm_16.json");
const AXIS_UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    #[default]
    Revolute,
    Fixed,
    Prismatic,
}

/// One chain element. Its frame is the parent frame translated by `xyz_mm`
/// and then rotated about `axis` by the joint angle (revolute joints only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainJoint {
    pub name: String,
    pub parent: Option<usize>,
    #[serde(default)]
    pub kind: JointKind,
    pub xyz_mm: [f64; 3],
    pub axis: [f64; 3],
    pub radius_mm: f64,
    #[serde(default = "default_limits")]
    pub limits_rad: [f64; 2],
}

fn default_limits() -> [f64; 2] {
    [-PI, PI]
}

/// Validated serial/tree chain in topological order; joint 0 is the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct RobotChain {
    joints: Vec<ChainJoint>,
    base: RigidPose,
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    joints: Vec<ChainJoint>,
    #[serde(default)]
    base: RigidPose,
}

impl TryFrom<ChainFile> for RobotChain {
    type Error = Error;

    fn try_from(f: ChainFile) -> Result<Self> {
        RobotChain::new(f.joints, f.base)
    }
}

impl From<RobotChain> for ChainFile {
    fn from(c: RobotChain) -> Self {
        ChainFile {
            joints: c.joints,
            base: c.base,
        }
    }
}

/// Angles for the revolute joints of a chain, in chain order (radians).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAngles(pub Vec<f64>);

/// Line segment swept by a sphere, attached to chain joint `joint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCapsule {
    pub joint: usize,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl RobotChain {
    pub fn new(joints: Vec<ChainJoint>, base: RigidPose) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidChain("chain has no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => {
                    return Err(Error::InvalidChain(format!(
                        "joint 0 ({:?}) is the base and cannot have a parent",
                        j.name
                    )))
                }
                (_, None) => {
                    return Err(Error::InvalidChain(format!(
                        "joint {i} ({:?}) has no parent",
                        j.name
                    )))
                }
                (_, Some(p)) if p >= i => {
                    return Err(Error::InvalidChain(format!(
                        "joint {i} ({:?}) has parent {p}; parents must precede children",
                        j.name
                    )))
                }
                _ => {}
            }
            if j.kind == JointKind::Prismatic {
                return Err(Error::InvalidChain(format!(
                    "joint {:?} is prismatic; only revolute and fixed joints are supported",
                    j.name
                )));
            }
            let norm = Vector3::from(j.axis).norm();
            if j.kind == JointKind::Revolute && (norm - 1.0).abs() > AXIS_UNIT_TOLERANCE {
                return Err(Error::InvalidChain(format!(
                    "joint {:?} axis has norm {norm}, expected 1",
                    j.name
                )));
            }
            let [lo, hi] = j.limits_rad;
            if !(lo <= hi) {
                return Err(Error::InvalidChain(format!(
                    "joint {:?} limits [{lo}, {hi}] are inverted",
                    j.name
                )));
            }
            if !(j.radius_mm >= 0.0) || !j.xyz_mm.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidChain(format!(
                    "joint {:?} has invalid geometry",
                    j.name
                )));
            }
        }
        Ok(Self { joints, base })
    }

    /// 16-joint dual-arm chain (fixed base and torso, two 7-joint arms).
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED_CHAIN).expect("bundled chain is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).at(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).at(path)
    }

    pub fn joints(&self) -> &[ChainJoint] {
        &self.joints
    }

    pub fn base(&self) -> &RigidPose {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    /// Indices of revolute joints, in the order [`JointAngles`] uses.
    pub fn revolute_indices(&self) -> Vec<usize> {
        self.joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.kind == JointKind::Revolute)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn dof(&self) -> usize {
        self.revolute_indices().len()
    }

    pub fn zero_angles(&self) -> JointAngles {
        JointAngles(vec![0.0; self.dof()])
    }

    /// Clamps every angle into its joint limits.
    pub fn clamp_angles(&self, q: &JointAngles) -> JointAngles {
        JointAngles(
            self.revolute_indices()
                .into_iter()
                .zip(&q.0)
                .map(|(i, v)| {
                    let [lo, hi] = self.joints[i].limits_rad;
                    v.clamp(lo, hi)
                })
                .collect(),
        )
    }

    fn check_angles(&self, q: &JointAngles) -> Result<()> {
        let revolute = self.revolute_indices();
        if q.0.len() != revolute.len() {
            return Err(Error::AngleCount {
                expected: revolute.len(),
                got: q.0.len(),
            });
        }
        for (&i, &v) in revolute.iter().zip(&q.0) {
            let j = &self.joints[i];
            let [lo, hi] = j.limits_rad;
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::JointLimit {
                    name: j.name.clone(),
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// World frame of every joint, given the frame the base pose maps into.
    pub fn joint_frames(&self, q: &JointAngles, base: &Isometry3<f64>) -> Result<Vec<Isometry3<f64>>> {
        self.check_angles(q)?;
        let mut angles = q.0.iter();
        let mut frames: Vec<Isometry3<f64>> = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let parent = j.parent.map_or(*base, |p| frames[p]);
            let mut local = Isometry3::from_parts(
                Translation3::from(Vector3::from(j.xyz_mm)),
                UnitQuaternion::identity(),
            );
            if j.kind == JointKind::Revolute {
                let angle = *angles.next().expect("angle count checked");
                let axis = Unit::new_normalize(Vector3::from(j.axis));
                local.rotation = UnitQuaternion::from_axis_angle(&axis, angle);
            }
            frames.push(parent * local);
        }
        Ok(frames)
    }

    /// Joint positions in the frame the chain's base pose maps into.
    pub fn forward_kinematics(&self, q: &JointAngles) -> Result<JointSet3D> {
        self.forward_kinematics_with_base(q, &self.base.to_isometry())
    }

    pub fn forward_kinematics_with_base(
        &self,
        q: &JointAngles,
        base: &Isometry3<f64>,
    ) -> Result<JointSet3D> {
        let frames = self.joint_frames(q, base)?;
        Ok(JointSet3D::from_positions(
            self.joints.iter().map(|j| j.name.clone()),
            frames.iter().map(|f| f.translation.vector),
        ))
    }

    /// One capsule per joint: from its parent to itself, or a sphere at the
    /// base for joint 0.
    pub fn link_capsules(&self, positions: &JointSet3D) -> Vec<LinkCapsule> {
        self.joints
            .iter()
            .enumerate()
            .map(|(i, j)| {
                let b = positions.joints[i].position;
                let a = j.parent.map_or(b, |p| positions.joints[p].position);
                LinkCapsule {
                    joint: i,
                    a,
                    b,
                    radius: j.radius_mm,
                }
            })
            .collect()
    }

    /// Largest radius among capsules touching each joint.
    pub fn joint_extent_radii(&self) -> Vec<f64> {
        let mut radii: Vec<f64> = self.joints.iter().map(|j| j.radius_mm).collect();
        for j in &self.joints {
            if let Some(p) = j.parent {
                radii[p] = radii[p].max(j.radius_mm);
            }
        }
        radii
    }
}

/// Applies `t` to a point; a small helper for tests and callers.
pub fn transform_point(t: &Isometry3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    t.transform_point(&Point3::from(*p)).coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn joint(name: &str, parent: Option<usize>, xyz: [f64; 3], axis: [f64; 3]) -> ChainJoint {
        ChainJoint {
            name: name.into(),
            parent,
            kind: JointKind::Revolute,
            xyz_mm: xyz,
            axis,
            radius_mm: 10.0,
            limits_rad: [-PI, PI],
        }
    }

    fn bundled_random_angles(chain: &RobotChain, seed: u64) -> JointAngles {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        JointAngles(
            chain
                .revolute_indices()
                .into_iter()
                .map(|i| {
                    let [lo, hi] = chain.joints()[i].limits_rad;
                    rng.random_range(lo..=hi)
                })
                .collect(),
        )
    }

    #[test]
    fn bundled_chain_has_sixteen_joints() {
        let c = RobotChain::bundled();
        assert_eq!(c.len(), 16);
        assert_eq!(c.dof(), 14);
    }

    #[test]
    fn zero_angles_accumulate_translations() {
        let c = RobotChain::bundled();
        let fk = c.forward_kinematics(&c.zero_angles()).unwrap();
        for (i, j) in c.joints().iter().enumerate() {
            let mut expected = Vector3::from(j.xyz_mm);
            let mut p = j.parent;
            while let Some(pi) = p {
                expected += Vector3::from(c.joints()[pi].xyz_mm);
                p = c.joints()[pi].parent;
            }
            assert!((fk.joints[i].position - expected).norm() < 1e-9, "{}", j.name);
        }
    }

    #[test]
    fn quarter_turn_about_z() {
        let c = RobotChain::new(
            vec![
                joint("root", None, [0.0; 3], [0.0, 0.0, 1.0]),
                joint("tip", Some(0), [100.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            ],
            RigidPose::identity(),
        )
        .unwrap();
        let fk = c
            .forward_kinematics(&JointAngles(vec![PI / 2.0, 0.0]))
            .unwrap();
        let d = fk.joints[1].position - fk.joints[0].position;
        assert!((d - Vector3::new(0.0, 100.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn link_lengths_are_invariant() {
        let c = RobotChain::bundled();
        let rest = c.forward_kinematics(&c.zero_angles()).unwrap();
        for seed in 0..100 {
            let fk = c.forward_kinematics(&bundled_random_angles(&c, seed)).unwrap();
            assert_eq!(fk.len(), 16);
            for (i, j) in c.joints().iter().enumerate() {
                if let Some(p) = j.parent {
                    let l0 = (rest.joints[i].position - rest.joints[p].position).norm();
                    let l = (fk.joints[i].position - fk.joints[p].position).norm();
                    assert!((l - l0).abs() <= 1e-6 * l0.max(1.0));
                }
            }
        }
    }

    #[test]
    fn limits_are_enforced() {
        let c = RobotChain::bundled();
        let mut q = c.zero_angles();
        q.0[3] = 3.0; // left_e1 upper limit is 2.618
        assert!(matches!(c.forward_kinematics(&q), Err(Error::JointLimit { .. })));
        assert!(matches!(
            c.forward_kinematics(&JointAngles(vec![0.0; 3])),
            Err(Error::AngleCount { expected: 14, got: 3 })
        ));
    }

    #[test]
    fn parent_order_violation_is_rejected() {
        let r = RobotChain::new(
            vec![
                joint("root", None, [0.0; 3], [0.0, 0.0, 1.0]),
                joint("a", Some(1), [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            ],
            RigidPose::identity(),
        );
        assert!(matches!(r, Err(Error::InvalidChain(_))));
    }

    #[test]
    fn non_unit_axis_and_prismatic_are_rejected() {
        let bad_axis = RobotChain::new(
            vec![joint("root", None, [0.0; 3], [0.0, 0.0, 1.1])],
            RigidPose::identity(),
        );
        assert!(bad_axis.is_err());
        let mut p = joint("root", None, [0.0; 3], [0.0, 0.0, 1.0]);
        p.kind = JointKind::Prismatic;
        let err = RobotChain::new(vec![p], RigidPose::identity()).unwrap_err();
        assert!(err.to_string().contains("prismatic"));
    }

    #[test]
    fn missing_limits_default_to_pi() {
        let c: RobotChain = serde_json::from_str(
            r#"{"joints":[{"name":"r","parent":null,"xyz_mm":[0,0,0],"axis":[0,0,1],"radius_mm":5}],
                "base":{"rotation_rpy_rad":[0,0,0],"translation_mm":[0,0,0]}}"#,
        )
        .unwrap();
        assert_eq!(c.joints()[0].limits_rad, [-PI, PI]);
    }

    #[test]
    fn save_load_is_field_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let c = RobotChain::bundled();
        c.save(&path).unwrap();
        assert_eq!(RobotChain::load(&path).unwrap(), c);
    }

    #[test]
    fn extent_radius_covers_children() {
        let c = RobotChain::bundled();
        let r = c.joint_extent_radii();
        assert_eq!(r[0], 160.0);
        // torso also carries both shoulder links
        assert_eq!(r[1], 150.0);
        assert!(r.iter().zip(c.joints()).all(|(r, j)| *r >= j.radius_mm));
    }

    proptest! {
        #[test]
        fn fk_is_equivariant_under_base_change(
            seed in 0u64..1000,
            rpy in prop::array::uniform3(-3.0f64..3.0),
            t in prop::array::uniform3(-2000.0f64..2000.0),
        ) {
            let c = RobotChain::bundled();
            let q = bundled_random_angles(&c, seed);
            let base = RigidPose { rotation_rpy_rad: rpy, translation_mm: t }.to_isometry();
            let moved = c.forward_kinematics_with_base(&q, &base).unwrap();
            let plain = c.forward_kinematics_with_base(&q, &Isometry3::identity()).unwrap();
            for (a, b) in moved.positions().zip(plain.positions()) {
                prop_assert!((a - transform_point(&base, b)).norm() < 1e-9);
            }
        }
    }
}
