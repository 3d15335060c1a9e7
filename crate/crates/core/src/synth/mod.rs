//! Synthetic depth sequences of a capsule-link robot.
//!
//! The world frame is z-up with the robot base at the origin. Depth is
//! rendered by casting one ray per pixel center against analytic link
//! capsules, an optional floor plane and an optional table box.

mod raycast;

pub use raycast::{point_segment_distance, Primitive};

use std::path::Path;

use nalgebra::{Isometry3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnnotationRecord, CameraRecord, Dataset, DatasetWriter};
use crate::error::{Error, Result};
use crate::geometry::{DepthImage, PinholeIntrinsics, RigidPose, DEFAULT_MAX_RANGE_MM};
use crate::joints::JointSet3D;
use crate::robot::{JointAngles, RobotChain};

/// Additive Gaussian depth noise followed by random dropout to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub stddev_mm: f64,
    pub dropout: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            stddev_mm: 3.0,
            dropout: 0.01,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            stddev_mm: 0.0,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stddev_mm >= 0.0 && self.stddev_mm.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise stddev must be >= 0, got {}",
                self.stddev_mm
            )));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!(
                "dropout must lie in [0, 1], got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn is_off(&self) -> bool {
        self.stddev_mm == 0.0 && self.dropout == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableBox {
    pub min_mm: [f64; 3],
    pub max_mm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub chain: Option<RobotChain>,
    pub camera: PinholeIntrinsics,
    /// world <- camera.
    pub camera_pose: RigidPose,
    /// Jittered cameras re-aim at this world point when set.
    pub aim_mm: Option<[f64; 3]>,
    pub ground_plane_mm: Option<f64>,
    pub table: Option<TableBox>,
    pub noise: NoiseModel,
    pub max_range_mm: f32,
}

impl SceneSpec {
    /// Bundled robot behind a table, seen obliquely from the front right at
    /// about 2.3 m.
    pub fn desk_default() -> Self {
        let aim = [300.0, 0.0, 800.0];
        Self {
            chain: Some(RobotChain::bundled()),
            camera: PinholeIntrinsics::desk_default(),
            camera_pose: RigidPose::look_at(
                Vector3::new(1700.0, -1500.0, 1450.0),
                Vector3::from(aim),
                Vector3::z(),
            ),
            aim_mm: Some(aim),
            ground_plane_mm: Some(0.0),
            table: Some(TableBox {
                min_mm: [450.0, -700.0, 0.0],
                max_mm: [1050.0, 700.0, 720.0],
            }),
            noise: NoiseModel::default(),
            max_range_mm: DEFAULT_MAX_RANGE_MM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.noise.validate()?;
        if !(self.max_range_mm > 0.0) {
            return Err(Error::InvalidParameter("max range must be positive".into()));
        }
        Ok(())
    }

    fn static_primitives(&self) -> Vec<Primitive> {
        let mut prims = Vec::new();
        if let Some(height) = self.ground_plane_mm {
            prims.push(Primitive::Plane { height });
        }
        if let Some(t) = &self.table {
            prims.push(Primitive::Box {
                min: Vector3::from(t.min_mm),
                max: Vector3::from(t.max_mm),
            });
        }
        prims
    }
}

/// Rendered frame with its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub depth: DepthImage,
    /// Noise-free depth, used for occlusion reasoning.
    pub clean_depth: DepthImage,
    /// Joints in the camera frame; `visible` is false when the joint leaves
    /// the image or is hidden behind other geometry.
    pub joints: JointSet3D,
}

/// Renders Z-depth of `primitives` (world coordinates) seen from `pose`
/// (world <- camera). Pixels with no hit, or a hit beyond `max_range`, are 0.
pub fn render_primitives(
    primitives: &[Primitive],
    k: &PinholeIntrinsics,
    pose: &Isometry3<f64>,
    max_range: f32,
) -> DepthImage {
    let origin = pose.translation.vector;
    let mut data = vec![0.0f32; k.width * k.height];
    data.par_chunks_mut(k.width)
        .enumerate()
        .for_each(|(v, row)| {
            for (u, px) in row.iter_mut().enumerate() {
                let dir = pose.rotation * k.pixel_ray(u as f64, v as f64);
                let hit = primitives
                    .iter()
                    .filter_map(|p| p.intersect(&origin, &dir))
                    .fold(f64::INFINITY, f64::min);
                let z = hit as f32;
                if hit.is_finite() && z > 0.0 && z <= max_range {
                    *px = z;
                }
            }
        });
    DepthImage::from_vec(k.width, k.height, max_range, data).expect("renderer output in range")
}

/// Applies Gaussian noise on Z then dropout, to valid pixels only.
pub fn apply_noise(depth: &mut DepthImage, noise: &NoiseModel, seed: u64) {
    if noise.is_off() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.stddev_mm.max(0.0)).expect("stddev validated");
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let d = depth.get(u, v);
            if d <= 0.0 {
                continue;
            }
            let noisy = d as f64 + normal.sample(&mut rng);
            let dropped = rng.random::<f64>() < noise.dropout;
            depth.set(u, v, if dropped { 0.0 } else { noisy as f32 });
        }
    }
}

/// World-frame capsules of the posed robot.
pub fn robot_primitives(chain: &RobotChain, q: &JointAngles) -> Result<Vec<Primitive>> {
    let world = chain.forward_kinematics(q)?;
    Ok(chain
        .link_capsules(&world)
        .into_iter()
        .map(|c| Primitive::Capsule {
            a: c.a,
            b: c.b,
            radius: c.radius,
        })
        .collect())
}

/// Renders one frame. `seed` drives the noise model.
pub fn render_frame(scene: &SceneSpec, q: &JointAngles, seed: u64) -> Result<RenderedFrame> {
    scene.validate()?;
    let pose = scene.camera_pose.to_isometry();
    let mut prims = scene.static_primitives();
    let mut joints = JointSet3D::default();
    let mut radii = Vec::new();
    if let Some(chain) = &scene.chain {
        prims.extend(robot_primitives(chain, q)?);
        let world = chain.forward_kinematics(q)?;
        joints = world.transformed(&pose.inverse());
        radii = chain.joint_extent_radii();
    }
    let clean = render_primitives(&prims, &scene.camera, &pose, scene.max_range_mm);
    let margin = 3.0 * scene.noise.stddev_mm;
    for (j, r) in joints.joints.iter_mut().zip(&radii) {
        j.visible = joint_unoccluded(&clean, &scene.camera, &j.position, r + margin);
    }
    let mut depth = clean.clone();
    apply_noise(&mut depth, &scene.noise, seed);
    Ok(RenderedFrame {
        depth,
        clean_depth: clean,
        joints,
    })
}

/// Spec-named entry point: depth only.
pub fn render_depth(scene: &SceneSpec, q: &JointAngles, seed: u64) -> Result<DepthImage> {
    Ok(render_frame(scene, q, seed)?.depth)
}

/// A joint is unoccluded when it projects into the image and the surface at
/// its pixel is no more than `tolerance` in front of it.
pub fn joint_unoccluded(
    depth: &DepthImage,
    k: &PinholeIntrinsics,
    p: &Vector3<f64>,
    tolerance: f64,
) -> bool {
    let Ok(uv) = k.project(p) else {
        return false;
    };
    if !k.contains(&uv) {
        return false;
    }
    let d = depth.get(uv.x.round() as usize, uv.y.round() as usize) as f64;
    d > 0.0 && d >= p.z - tolerance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSegment {
    pub start: JointAngles,
    pub end: JointAngles,
}

/// Piecewise-linear joint-space trajectory. Frames are spread uniformly over
/// the whole script; an empty script holds the zero pose.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionScript {
    pub segments: Vec<MotionSegment>,
}

impl MotionScript {
    pub fn angles_at(&self, frame: usize, num_frames: usize, dof: usize) -> JointAngles {
        if self.segments.is_empty() {
            return JointAngles(vec![0.0; dof]);
        }
        let n = self.segments.len();
        let s = if num_frames <= 1 {
            0.0
        } else {
            frame as f64 / (num_frames - 1) as f64 * n as f64
        };
        let idx = (s.floor() as usize).min(n - 1);
        let t = s - idx as f64;
        let seg = &self.segments[idx];
        JointAngles(
            seg.start
                .0
                .iter()
                .zip(&seg.end.0)
                .map(|(a, b)| a + (b - a) * t)
                .collect(),
        )
    }
}

/// Ranges for random pick and place arm poses (left arm; the right arm
/// mirrors the first joint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceBounds {
    pub home: Vec<f64>,
    pub ranges: Vec<[f64; 2]>,
}

impl Default for PickPlaceBounds {
    fn default() -> Self {
        Self {
            home: vec![0.3, -0.4, 0.0, 1.6, 0.0, 0.6, 0.0],
            ranges: vec![
                [-0.2, 0.8],
                [-0.3, 0.5],
                [-0.4, 0.4],
                [0.6, 1.8],
                [-0.5, 0.5],
                [0.2, 1.4],
                [-1.0, 1.0],
            ],
        }
    }
}

/// Random pick-n-place motions alternating between the `left_*` and
/// `right_*` joints: home -> pick -> place -> home for each motion.
pub fn pick_and_place_script(
    chain: &RobotChain,
    motions: usize,
    bounds: &PickPlaceBounds,
    rng: &mut impl Rng,
) -> Result<MotionScript> {
    let revolute = chain.revolute_indices();
    let arm_slots = |prefix: &str| -> Vec<usize> {
        revolute
            .iter()
            .enumerate()
            .filter(|(_, &j)| chain.joints()[j].name.starts_with(prefix))
            .map(|(slot, _)| slot)
            .collect()
    };
    let arms = [arm_slots("left"), arm_slots("right")];
    if arms.iter().any(|a| a.len() != bounds.ranges.len() || a.len() != bounds.home.len()) {
        return Err(Error::InvalidParameter(format!(
            "pick-n-place bounds cover {} joints; chain arms have {} and {}",
            bounds.ranges.len(),
            arms[0].len(),
            arms[1].len()
        )));
    }
    let mirror = |side: usize, i: usize, v: f64| if side == 1 && i == 0 { -v } else { v };
    let mut home = vec![0.0; revolute.len()];
    for (side, slots) in arms.iter().enumerate() {
        for (i, &slot) in slots.iter().enumerate() {
            home[slot] = mirror(side, i, bounds.home[i]);
        }
    }
    let home = chain.clamp_angles(&JointAngles(home));
    let mut segments = Vec::with_capacity(motions * 3);
    for m in 0..motions {
        let side = m % 2;
        let mut sample = || {
            let mut q = home.clone();
            for (i, &slot) in arms[side].iter().enumerate() {
                let [lo, hi] = bounds.ranges[i];
                q.0[slot] = mirror(side, i, rng.random_range(lo..=hi));
            }
            chain.clamp_angles(&q)
        };
        let pick = sample();
        let place = sample();
        segments.push(MotionSegment {
            start: home.clone(),
            end: pick.clone(),
        });
        segments.push(MotionSegment {
            start: pick,
            end: place.clone(),
        });
        segments.push(MotionSegment {
            start: place,
            end: home.clone(),
        });
    }
    Ok(MotionScript { segments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub num_frames: usize,
    pub script: MotionScript,
    /// Diameter of the ball the camera center is drawn from, around the
    /// scene's anchor pose.
    pub jitter_diameter_mm: f64,
    pub seed: u64,
}

impl SequenceSpec {
    /// Random pick-n-place sequence whose script and camera jitter both
    /// derive from `seed`.
    pub fn pick_and_place(
        chain: &RobotChain,
        num_frames: usize,
        motions: usize,
        jitter_diameter_mm: f64,
        seed: u64,
    ) -> Result<Self> {
        // separate stream from the one used for camera jitter
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let script = pick_and_place_script(chain, motions, &PickPlaceBounds::default(), &mut rng)?;
        Ok(Self {
            num_frames,
            script,
            jitter_diameter_mm,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_frames == 0 {
            return Err(Error::InvalidParameter("a sequence needs at least one frame".into()));
        }
        if !(self.jitter_diameter_mm >= 0.0) {
            return Err(Error::InvalidParameter("jitter diameter must be >= 0".into()));
        }
        Ok(())
    }
}

/// Camera pose for a sequence: the anchor center moved uniformly inside a
/// ball of the given diameter, re-aimed at `scene.aim_mm` when set.
pub fn jittered_camera(scene: &SceneSpec, diameter: f64, rng: &mut impl Rng) -> RigidPose {
    let radius = diameter / 2.0;
    if radius <= 0.0 {
        return scene.camera_pose;
    }
    let offset = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if v.norm_squared() <= 1.0 {
            break v * radius;
        }
    };
    let anchor = scene.camera_pose.to_isometry();
    let eye = anchor.translation.vector + offset;
    match scene.aim_mm {
        Some(aim) => RigidPose::look_at(eye, Vector3::from(aim), Vector3::z()),
        None => {
            let mut pose = scene.camera_pose;
            pose.translation_mm = [eye.x, eye.y, eye.z];
            pose
        }
    }
}

/// Renders a sequence into `writer` under `sequence_id`.
///
/// Frame `f` uses noise seed `seq.seed + f`; frames render in parallel and
/// are written in order, so output is independent of thread count.
pub fn generate_sequence_into(
    writer: &mut DatasetWriter,
    sequence_id: &str,
    scene: &SceneSpec,
    seq: &SequenceSpec,
) -> Result<RigidPose> {
    scene.validate()?;
    seq.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seq.seed);
    let pose = jittered_camera(scene, seq.jitter_diameter_mm, &mut rng);
    let framed = SceneSpec {
        camera_pose: pose,
        ..scene.clone()
    };
    let dof = scene.chain.as_ref().map_or(0, |c| c.dof());
    let frames: Vec<Result<RenderedFrame>> = (0..seq.num_frames)
        .into_par_iter()
        .map(|f| {
            let q = seq.script.angles_at(f, seq.num_frames, dof);
            render_frame(&framed, &q, seq.seed.wrapping_add(f as u64))
        })
        .collect();
    let mut sw = writer.sequence(sequence_id)?;
    for (f, frame) in frames.into_iter().enumerate() {
        let frame = frame?;
        sw.push(
            AnnotationRecord {
                frame_id: f as u64,
                sequence: sequence_id.into(),
                depth: String::new(),
                joints: frame.joints.to_records(),
                camera: CameraRecord {
                    intrinsics: scene.camera,
                    pose,
                },
                seed: seq.seed.wrapping_add(f as u64),
            },
            &frame.depth,
        )?;
    }
    sw.finish()?;
    Ok(pose)
}

/// Writes a one-sequence dataset (`seq_000`) to `out_dir`.
pub fn generate_sequence(scene: &SceneSpec, seq: &SequenceSpec, out_dir: impl AsRef<Path>) -> Result<Dataset> {
    let names = scene.chain.as_ref().map(|c| c.names()).unwrap_or_default();
    let mut writer = DatasetWriter::create(&out_dir, names, scene.max_range_mm)?;
    if let Some(chain) = &scene.chain {
        writer.set_chain(chain)?;
    }
    generate_sequence_into(&mut writer, "seq_000", scene, seq)?;
    let root = writer.finish()?;
    crate::dataset::load_dataset(root)
}

/// Projects camera-frame points, keeping only those landing in the image.
pub fn visible_pixels(k: &PinholeIntrinsics, joints: &JointSet3D) -> Vec<Option<(usize, usize)>> {
    joints
        .positions()
        .map(|p| {
            k.project(p)
                .ok()
                .filter(|uv| k.contains(uv))
                .map(|uv| (uv.x.round() as usize, uv.y.round() as usize))
        })
        .collect()
}

/// World-frame point seen in a camera (for callers holding a world pose).
pub fn world_to_camera(pose: &RigidPose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.to_isometry()
        .inverse_transform_point(&Point3::from(*p))
        .coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject;

    fn bare_scene() -> SceneSpec {
        SceneSpec {
            chain: None,
            camera: PinholeIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).unwrap(),
            camera_pose: RigidPose::identity(),
            aim_mm: None,
            ground_plane_mm: None,
            table: None,
            noise: NoiseModel::none(),
            max_range_mm: DEFAULT_MAX_RANGE_MM,
        }
    }

    #[test]
    fn empty_scene_renders_zeros() {
        let d = render_depth(&bare_scene(), &JointAngles::default(), 0).unwrap();
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn sphere_on_axis_center_pixel() {
        let s = bare_scene();
        let prim = [Primitive::Sphere {
            center: Vector3::new(0.0, 0.0, 1000.0),
            radius: 80.0,
        }];
        let d = render_primitives(&prim, &s.camera, &Isometry3::identity(), s.max_range_mm);
        assert_eq!(d.get(32, 32), 920.0);
    }

    #[test]
    fn fronto_parallel_plane_is_constant() {
        // camera looking straight down at the floor from 1500 mm
        let s = SceneSpec {
            camera_pose: RigidPose::look_at(
                Vector3::new(0.0, 0.0, 1500.0),
                Vector3::zeros(),
                Vector3::x(),
            ),
            ground_plane_mm: Some(0.0),
            ..bare_scene()
        };
        let d = render_depth(&s, &JointAngles::default(), 0).unwrap();
        assert_eq!(d.valid_count(), 64 * 64);
        assert!(d.data().iter().all(|v| (*v - 1500.0).abs() < 1e-3));
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let s = bare_scene();
        let prim = [Primitive::Sphere {
            center: Vector3::new(0.0, 0.0, 1000.0),
            radius: 300.0,
        }];
        let clean = render_primitives(&prim, &s.camera, &Isometry3::identity(), s.max_range_mm);
        let noise = NoiseModel {
            stddev_mm: 3.0,
            dropout: 0.1,
        };
        let mut a = clean.clone();
        let mut b = clean.clone();
        apply_noise(&mut a, &noise, 9);
        apply_noise(&mut b, &noise, 9);
        assert_eq!(a, b);
        let dropped = clean.valid_count() - a.valid_count();
        assert!(dropped > 0 && dropped < clean.valid_count() / 4);
        assert!(a
            .data()
            .iter()
            .zip(clean.data())
            .all(|(n, c)| *n == 0.0 || (n - c).abs() < 30.0));
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let mut s = bare_scene();
        s.noise.dropout = 1.5;
        assert!(render_depth(&s, &JointAngles::default(), 0).is_err());
        s.noise = NoiseModel {
            stddev_mm: -1.0,
            dropout: 0.0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn robot_hit_points_lie_on_capsules() {
        let mut scene = SceneSpec::desk_default();
        scene.camera = PinholeIntrinsics::new(40.0, 40.0, 32.0, 32.0, 64, 64).unwrap();
        scene.noise = NoiseModel::none();
        scene.table = None;
        scene.ground_plane_mm = None;
        let chain = scene.chain.clone().unwrap();
        let q = chain.zero_angles();
        let depth = render_depth(&scene, &q, 0).unwrap();
        let pose = scene.camera_pose.to_isometry();
        let prims: Vec<Primitive> = robot_primitives(&chain, &q).unwrap();
        let xyz = backproject(&depth, &scene.camera).unwrap();
        assert!(xyz.valid_count() > 50);
        for p in xyz.points() {
            let w = pose.transform_point(&Point3::from(*p)).coords;
            let dist = prims
                .iter()
                .map(|c| c.surface_distance(&w))
                .fold(f64::INFINITY, f64::min);
            assert!(dist < 0.5, "{dist}");
        }
    }

    #[test]
    fn script_interpolates_linearly() {
        let script = MotionScript {
            segments: vec![
                MotionSegment {
                    start: JointAngles(vec![0.0]),
                    end: JointAngles(vec![1.0]),
                },
                MotionSegment {
                    start: JointAngles(vec![1.0]),
                    end: JointAngles(vec![-1.0]),
                },
            ],
        };
        assert_eq!(script.angles_at(0, 5, 1).0, vec![0.0]);
        assert_eq!(script.angles_at(1, 5, 1).0, vec![0.5]);
        assert_eq!(script.angles_at(2, 5, 1).0, vec![1.0]);
        assert_eq!(script.angles_at(3, 5, 1).0, vec![0.0]);
        assert_eq!(script.angles_at(4, 5, 1).0, vec![-1.0]);
        assert_eq!(MotionScript::default().angles_at(3, 5, 2).0, vec![0.0, 0.0]);
    }

    #[test]
    fn pick_and_place_alternates_arms_within_limits() {
        let chain = RobotChain::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let script = pick_and_place_script(&chain, 4, &PickPlaceBounds::default(), &mut rng).unwrap();
        assert_eq!(script.segments.len(), 12);
        // first motion moves only the left arm (angle slots 0..7)
        let pick = &script.segments[0].end.0;
        let home = &script.segments[0].start.0;
        assert!(pick[7..].iter().zip(&home[7..]).all(|(a, b)| a == b));
        assert!(pick[..7].iter().zip(&home[..7]).any(|(a, b)| a != b));
        let pick2 = &script.segments[3].end.0;
        assert!(pick2[..7].iter().zip(&home[..7]).all(|(a, b)| a == b));
        for seg in &script.segments {
            assert!(chain.forward_kinematics(&seg.end).is_ok());
        }
    }

    #[test]
    fn jitter_stays_inside_ball() {
        let scene = SceneSpec::desk_default();
        let anchor = Vector3::from(scene.camera_pose.translation_mm);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = jittered_camera(&scene, 1000.0, &mut rng);
            assert!((Vector3::from(p.translation_mm) - anchor).norm() <= 500.0 + 1e-9);
        }
    }

    #[test]
    fn one_frame_identity_script() {
        let dir = tempfile::tempdir().unwrap();
        let scene = SceneSpec::desk_default();
        let seq = SequenceSpec {
            num_frames: 1,
            script: MotionScript::default(),
            jitter_diameter_mm: 0.0,
            seed: 1,
        };
        let ds = generate_sequence(&scene, &seq, dir.path()).unwrap();
        assert_eq!(ds.num_frames(), 1);
        let pngs = std::fs::read_dir(dir.path().join("seq_000/depth")).unwrap().count();
        assert_eq!(pngs, 1);
        let lines = std::fs::read_to_string(dir.path().join("seq_000/annotations.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 1);
    }

    #[test]
    fn zero_frames_is_rejected() {
        let seq = SequenceSpec {
            num_frames: 0,
            script: MotionScript::default(),
            jitter_diameter_mm: 0.0,
            seed: 1,
        };
        assert!(seq.validate().is_err());
    }
}
