//! Subcommand implementations. Each returns the number of per-frame
//! failures; any other error aborts the command.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spdh::augment::augment_frame;
use spdh::codec::{decode_detailed, DecodeOptions, SpdhEncoder, SpdhStack, StackMeta};
use spdh::dataset::{self, CameraRecord, Dataset, DatasetWriter, FrameRecord};
use spdh::geometry::{backproject, normalize_xyz, NormalizationSpec, PinholeIntrinsics, RigidPose};
use spdh::joints::{JointRecord, JointSet3D};
use spdh::metrics::{
    baseline_2d_to_3d, comparison_table, evaluate_run, predictions_by_frame, read_predictions,
    write_predictions, EvalConfig, FrameKey, PoseMetricsReport, PredictionRecord,
};
use spdh::robot::RobotChain;
use spdh::synth::{generate_sequence_into, NoiseModel, SceneSpec, SequenceSpec};

use crate::config::RunConfig;
use crate::viz;

pub const STACKS_INDEX: &str = "stacks.json";
pub const TARGETS_FILE: &str = "targets.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StackFormat {
    /// Little-endian f32 container.
    #[default]
    Raw,
    /// 16-bit multi-frame PNG pair with a JSON sidecar.
    Png,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackEntry {
    pub sequence: String,
    pub frame_id: u64,
    /// Relative to the index directory. Raw: the file; PNG: the prefix.
    pub path: String,
    /// Intrinsics at heatmap resolution.
    pub intrinsics: PinholeIntrinsics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StacksIndex {
    pub format: StackFormat,
    pub augmented: bool,
    pub meta: StackMeta,
    pub frames: Vec<StackEntry>,
}

impl StacksIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(STACKS_INDEX);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn read_stack(&self, dir: &Path, entry: &StackEntry) -> Result<SpdhStack> {
        let path = dir.join(&entry.path);
        let stack = match self.format {
            StackFormat::Raw => SpdhStack::read_raw(&path, &self.meta),
            StackFormat::Png => SpdhStack::read_png(&path),
        };
        stack.with_context(|| format!("reading stack {}", path.display()))
    }
}

/// Ground truth as seen by the encoder: joints after augmentation, visible
/// only when visible in the source frame and inside the encodable range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub sequence: String,
    pub frame_id: u64,
    pub joints: Vec<JointRecord>,
    pub encodable: Vec<bool>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn frame_camera(cfg: &RunConfig, frame: &FrameRecord) -> Result<PinholeIntrinsics> {
    Ok(cfg.camera_override()?.unwrap_or(frame.camera.intrinsics))
}

#[derive(Debug, Clone, Default)]
pub struct SynthArgs {
    pub frames: Option<usize>,
    pub sequences: Option<usize>,
    pub motions: Option<usize>,
    pub jitter_mm: Option<f64>,
    pub noise_mm: Option<f64>,
    pub dropout: Option<f64>,
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.synth;
        if let Some(v) = self.frames {
            s.frames = v;
        }
        if let Some(v) = self.sequences {
            s.sequences = v;
        }
        if let Some(v) = self.motions {
            s.motions = v;
        }
        if let Some(v) = self.jitter_mm {
            s.jitter_diameter_mm = v;
        }
        if let Some(v) = self.noise_mm {
            s.noise_stddev_mm = v;
        }
        if let Some(v) = self.dropout {
            s.dropout = v;
        }
    }
}

/// Scene described by the synthesis section of `cfg`.
pub fn synth_scene(cfg: &RunConfig) -> Result<SceneSpec> {
    let mut scene = SceneSpec::desk_default();
    if let Some(k) = cfg.camera_override()? {
        scene.camera = k;
    }
    if !cfg.synth.ground_plane {
        scene.ground_plane_mm = None;
    }
    if !cfg.synth.table {
        scene.table = None;
    }
    scene.noise = NoiseModel {
        stddev_mm: cfg.synth.noise_stddev_mm,
        dropout: cfg.synth.dropout,
    };
    scene.validate()?;
    Ok(scene)
}

/// Sequence `i` uses seed `seed + i * 2^32`, so frame seeds never collide
/// across sequences.
pub fn sequence_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64) << 32)
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<usize> {
    let s = &cfg.synth;
    if s.frames == 0 || s.sequences == 0 {
        bail!("synth needs at least one frame and one sequence");
    }
    let scene = synth_scene(cfg)?;
    let chain = scene.chain.clone().unwrap_or_else(RobotChain::bundled);
    let mut writer = DatasetWriter::create(out, chain.names(), scene.max_range_mm)?;
    writer.set_chain(&chain)?;
    for i in 0..s.sequences {
        let seed = sequence_seed(cfg.seed, i);
        let spec = SequenceSpec::pick_and_place(&chain, s.frames, s.motions, s.jitter_diameter_mm, seed)?;
        let id = format!("seq_{i:03}");
        info!("rendering {id}: {} frames", s.frames);
        generate_sequence_into(&mut writer, &id, &scene, &spec)?;
    }
    writer.finish()?;
    cfg.dump(out)?;
    Ok(0)
}

pub fn encode(cfg: &RunConfig, dataset_dir: &Path, out: &Path, augment: bool, format: StackFormat) -> Result<usize> {
    let ds = dataset::load_dataset(dataset_dir)?;
    let quant = cfg.quantization()?;
    let spec = cfg.augment_spec();
    let max_range = ds.manifest.max_range_mm;
    create_dir(out)?;
    let frames: Vec<&FrameRecord> = ds.frames().collect();
    let results: Vec<Result<(StackEntry, TargetRecord)>> = frames
        .par_iter()
        .map(|f| {
            let k_src = frame_camera(cfg, f)?;
            let mut joints = f.joints.clone();
            if augment {
                let depth = f.load_depth(max_range)?;
                joints = augment_frame(&depth, &joints, &k_src, &spec, f.frame_id)?.joints;
            }
            let k = cfg.heatmap_intrinsics(&k_src);
            let encoder = SpdhEncoder::new(k, quant, cfg.spdh.sigma_m)?;
            let (stack, encodable) = encoder.encode(&joints)?;
            let rel = match format {
                StackFormat::Raw => format!("stacks/{}/{:06}.spdh", f.sequence, f.frame_id),
                StackFormat::Png => format!("stacks/{}/{:06}", f.sequence, f.frame_id),
            };
            let path = out.join(&rel);
            create_dir(path.parent().expect("stack path has a parent"))?;
            match format {
                StackFormat::Raw => stack.write_raw(&path)?,
                StackFormat::Png => stack.write_png(&path)?,
            }
            for (j, e) in joints.joints.iter_mut().zip(&encodable) {
                j.visible &= *e;
            }
            Ok((
                StackEntry {
                    sequence: f.sequence.clone(),
                    frame_id: f.frame_id,
                    path: rel,
                    intrinsics: k,
                },
                TargetRecord {
                    sequence: f.sequence.clone(),
                    frame_id: f.frame_id,
                    joints: joints.to_records(),
                    encodable,
                },
            ))
        })
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    let mut targets = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (f, r) in frames.iter().zip(results) {
        match r {
            Ok((e, t)) => {
                entries.push(e);
                targets.push(t);
            }
            Err(e) => {
                failures += 1;
                eprintln!("frame {}/{}: {e:#}", f.sequence, f.frame_id);
            }
        }
    }
    let index = StacksIndex {
        format,
        augmented: augment,
        meta: StackMeta {
            quant,
            sigma_m: cfg.spdh.sigma_m,
            joint_names: ds.manifest.joint_names.clone(),
        },
        frames: entries,
    };
    let path = out.join(STACKS_INDEX);
    std::fs::write(&path, serde_json::to_string_pretty(&index)?)
        .with_context(|| format!("writing {}", path.display()))?;
    write_jsonl(&out.join(TARGETS_FILE), &targets)?;
    let mut effective = cfg.clone();
    effective.augment.enabled = augment;
    effective.dump(out)?;
    Ok(failures)
}

pub fn decode(cfg: &RunConfig, stacks_dir: &Path, out: &Path, baseline: Option<&Path>) -> Result<usize> {
    let index = StacksIndex::load(stacks_dir)?;
    let opts = DecodeOptions {
        peak_threshold: cfg.decode.peak_threshold,
        refinement: cfg.decode.refinement,
    };
    let gt_frames: Option<(Dataset, BTreeMap<FrameKey, usize>)> = match baseline {
        None => None,
        Some(dir) => {
            if index.augmented {
                bail!("the depth baseline needs stacks encoded without augmentation");
            }
            let ds = dataset::load_dataset(dir)?;
            let keys = ds.frames().enumerate().map(|(i, f)| (f.key(), i)).collect();
            Some((ds, keys))
        }
    };
    let results: Vec<Result<PredictionRecord>> = index
        .frames
        .par_iter()
        .map(|e| {
            let stack = index.read_stack(stacks_dir, e)?;
            let k = &e.intrinsics;
            let detail = decode_detailed(&stack, k, &opts)?;
            let joints = match &gt_frames {
                None => JointSet3D::new(
                    detail
                        .iter()
                        .zip(&stack.joint_names)
                        .map(|(d, name)| spdh::Joint {
                            name: name.clone(),
                            position: d.position,
                            visible: d.visible,
                        })
                        .collect(),
                ),
                Some((ds, keys)) => {
                    let key = (e.sequence.clone(), e.frame_id);
                    let idx = keys
                        .get(&key)
                        .ok_or_else(|| anyhow!("no dataset frame for {}/{}", e.sequence, e.frame_id))?;
                    let frame = ds.frames().nth(*idx).expect("index built from the same dataset");
                    let depth = frame
                        .load_depth(ds.manifest.max_range_mm)?
                        .resize_nearest(k.width, k.height)?;
                    let uv: Vec<_> = detail.iter().map(|d| nalgebra::Point2::new(d.u, d.v)).collect();
                    let mut j = baseline_2d_to_3d(&stack.joint_names, &uv, &depth, k, cfg.decode.baseline_sampling)?;
                    for (joint, d) in j.joints.iter_mut().zip(&detail) {
                        joint.visible &= d.peak_uv >= opts.peak_threshold;
                    }
                    j
                }
            };
            Ok(PredictionRecord {
                sequence: e.sequence.clone(),
                frame_id: e.frame_id,
                joints: joints.to_records(),
            })
        })
        .collect();
    let mut preds = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (e, r) in index.frames.iter().zip(results) {
        match r {
            Ok(p) => preds.push(p),
            Err(err) => {
                failures += 1;
                eprintln!("frame {}/{}: {err:#}", e.sequence, e.frame_id);
            }
        }
    }
    create_dir(out)?;
    write_predictions(out.join(PREDICTIONS_FILE), &preds)?;
    cfg.dump(out)?;
    if failures > 0 {
        warn!("{failures} of {} frames failed to decode", index.frames.len());
    }
    Ok(failures)
}

/// Ground truth keyed by frame, from a target file or a dataset.
pub fn load_ground_truth(dataset_dir: Option<&Path>, targets: Option<&Path>) -> Result<BTreeMap<FrameKey, JointSet3D>> {
    match (dataset_dir, targets) {
        (_, Some(t)) => Ok(read_targets(t)?
            .into_iter()
            .map(|r| ((r.sequence, r.frame_id), JointSet3D::from_records(r.joints)))
            .collect()),
        (Some(d), None) => Ok(dataset::load_dataset(d)?
            .frames()
            .map(|f| (f.key(), f.joints.clone()))
            .collect()),
        (None, None) => bail!("eval needs --dataset or --targets"),
    }
}

/// Display name for a predictions file: its stem, or its directory name
/// when the stem is the default file name.
pub fn prediction_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if path.file_name().is_some_and(|n| n == PREDICTIONS_FILE) {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

pub fn eval(
    cfg: &RunConfig,
    preds: &[PathBuf],
    names: &[String],
    gt: &BTreeMap<FrameKey, JointSet3D>,
    out: &Path,
) -> Result<(usize, String)> {
    if preds.is_empty() {
        bail!("eval needs at least one --pred file");
    }
    if !names.is_empty() && names.len() != preds.len() {
        bail!("{} names given for {} prediction files", names.len(), preds.len());
    }
    let config = EvalConfig {
        thresholds_mm: cfg.eval.thresholds_mm.clone(),
        pooling: cfg.eval.pooling,
    };
    create_dir(out)?;
    let mut rows: Vec<(String, PoseMetricsReport)> = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        let name = names.get(i).cloned().unwrap_or_else(|| prediction_name(p));
        let pred = predictions_by_frame(read_predictions(p)?)?;
        let report = evaluate_run(&pred, gt, &config).with_context(|| format!("evaluating {}", p.display()))?;
        rows.push((name, report));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (name, report) in &rows {
        let file = if rows.len() == 1 {
            "report.json".to_string()
        } else {
            format!("report_{name}.json")
        };
        if !seen.insert(file.clone()) {
            bail!("two prediction files share the name {name:?}; pass --name");
        }
        std::fs::write(out.join(&file), report.to_json()?)?;
    }
    let table = comparison_table(&rows);
    std::fs::write(out.join("table.txt"), &table)?;
    cfg.dump(out)?;
    Ok((0, table))
}

/// Parses `seq:frame`.
pub fn parse_frame_key(s: &str) -> Result<FrameKey> {
    let (seq, id) = s
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("expected SEQUENCE:FRAME_ID, got {s:?}"))?;
    Ok((seq.to_string(), id.parse().with_context(|| format!("bad frame id in {s:?}"))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub name: String,
    pub u: f64,
    pub v: f64,
}

/// Heatmaps of one encoded frame: `uv_<joint>.png` and `uz_<joint>.png` per
/// joint, plus `overlay.png` with target markers.
pub fn viz_stacks(stacks_dir: &Path, frame: Option<&FrameKey>, out: &Path) -> Result<usize> {
    let index = StacksIndex::load(stacks_dir)?;
    let entry = match frame {
        Some((seq, id)) => index
            .frames
            .iter()
            .find(|e| &e.sequence == seq && e.frame_id == *id)
            .ok_or_else(|| anyhow!("frame {seq}:{id} not in {}", stacks_dir.display()))?,
        None => index.frames.first().ok_or_else(|| anyhow!("no frames in stack index"))?,
    };
    let stack = index.read_stack(stacks_dir, entry)?;
    create_dir(out)?;
    for (i, name) in stack.joint_names.iter().enumerate() {
        viz::save_heatmap(&stack.uv_maps[i], &out.join(format!("uv_{name}.png")))?;
        viz::save_heatmap(&stack.uz_maps[i], &out.join(format!("uz_{name}.png")))?;
    }
    let mut canvas = viz::heatmap_canvas(&stack.uv_maps);
    let targets_path = stacks_dir.join(TARGETS_FILE);
    let mut markers = Vec::new();
    if targets_path.exists() {
        if let Some(t) = read_targets(&targets_path)?
            .into_iter()
            .find(|t| t.sequence == entry.sequence && t.frame_id == entry.frame_id)
        {
            markers = project_markers(&JointSet3D::from_records(t.joints), &entry.intrinsics);
        }
    }
    for m in &markers {
        canvas.marker(m.u, m.v, viz::MARKER_RGB);
    }
    canvas.save(&out.join("overlay.png"))?;
    std::fs::write(out.join("markers.json"), serde_json::to_string_pretty(&markers)?)?;
    Ok(0)
}

fn project_markers(joints: &JointSet3D, k: &PinholeIntrinsics) -> Vec<Marker> {
    joints
        .joints
        .iter()
        .filter(|j| j.visible)
        .filter_map(|j| {
            let uv = k.project(&j.position).ok().filter(|uv| k.contains(uv))?;
            Some(Marker {
                name: j.name.clone(),
                u: uv.x,
                v: uv.y,
            })
        })
        .collect()
}

/// Depth colormap, normalized XYZ channels and a skeleton overlay for one
/// dataset frame.
pub fn viz_dataset(dataset_dir: &Path, frame: Option<&FrameKey>, out: &Path) -> Result<usize> {
    let ds = dataset::load_dataset(dataset_dir)?;
    let f = match frame {
        Some(key) => ds
            .frames()
            .find(|f| &f.key() == key)
            .ok_or_else(|| anyhow!("frame {}:{} not in dataset", key.0, key.1))?,
        None => ds.frames().next().ok_or_else(|| anyhow!("dataset has no frames"))?,
    };
    let depth = f.load_depth(ds.manifest.max_range_mm)?;
    let k = f.camera.intrinsics;
    create_dir(out)?;
    let mut canvas = viz::depth_canvas(&depth);
    canvas.save(&out.join("depth.png"))?;
    let xyz = normalize_xyz(&backproject(&depth, &k)?, &NormalizationSpec::default())?;
    for (c, axis) in ["x", "y", "z"].iter().enumerate() {
        let channel: Vec<f64> = xyz.data.iter().map(|p| p[c]).collect();
        viz::save_channel(&channel, xyz.width, xyz.height, &out.join(format!("xyz_{axis}.png")))?;
    }
    if let Some(chain) = ds.chain_path().map(RobotChain::load).transpose()? {
        let pts: Vec<Option<(f64, f64)>> = f
            .joints
            .joints
            .iter()
            .map(|j| k.project(&j.position).ok().map(|p| (p.x, p.y)))
            .collect();
        for (i, cj) in chain.joints().iter().enumerate() {
            let parent = cj.parent.and_then(|p| pts.get(p).copied().flatten());
            if let (Some(a), Some(b)) = (pts.get(i).copied().flatten(), parent) {
                canvas.line(a, b, viz::BONE_RGB);
            }
        }
    }
    let markers = project_markers(&f.joints, &k);
    for m in &markers {
        canvas.marker(m.u, m.v, viz::MARKER_RGB);
    }
    canvas.save(&out.join("skeleton.png"))?;
    std::fs::write(out.join("markers.json"), serde_json::to_string_pretty(&markers)?)?;
    Ok(0)
}

pub fn convert(cfg: &RunConfig, depth_dir: &Path, joints_csv: &Path, sequence: &str, out: &Path) -> Result<usize> {
    let k = cfg
        .camera_override()?
        .ok_or_else(|| anyhow!("convert needs --camera for the recording's intrinsics"))?;
    let camera = CameraRecord {
        intrinsics: k,
        pose: RigidPose::identity(),
    };
    let ds = dataset::convert(depth_dir, joints_csv, &camera, sequence, out)?;
    info!("converted {} frames", ds.num_frames());
    Ok(0)
}
