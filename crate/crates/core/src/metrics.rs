//! ADD and mAP pose metrics, plus the depth-sampling 2D-to-3D baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use nalgebra::{Point2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::geometry::{DepthImage, PinholeIntrinsics};
use crate::joints::{Joint, JointRecord, JointSet3D};

pub const DEFAULT_THRESHOLDS_MM: [f64; 4] = [40.0, 60.0, 80.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn of(&self, d: &Vector3<f64>) -> f64 {
        match self {
            Norm::L1 => d.abs().sum(),
            Norm::L2 => d.norm(),
        }
    }
}

/// A joint takes part in evaluation when the ground truth marks it visible
/// and the prediction reports it as detected.
fn included(pred: &Joint, gt: &Joint) -> bool {
    gt.visible && pred.visible
}

/// Per-joint errors (mm) under `norm`, `None` for excluded joints.
pub fn joint_errors(pred: &JointSet3D, gt: &JointSet3D, norm: Norm) -> Result<Vec<Option<f64>>> {
    pred.check_aligned(gt)?;
    Ok(pred
        .joints
        .iter()
        .zip(&gt.joints)
        .map(|(p, g)| included(p, g).then(|| norm.of(&(p.position - g.position))))
        .collect())
}

/// Mean joint distance in cm over the included joints of one frame.
pub fn add_metric(pred: &JointSet3D, gt: &JointSet3D, norm: Norm) -> Result<f64> {
    let errs: Vec<f64> = joint_errors(pred, gt, norm)?.into_iter().flatten().collect();
    if errs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64 / 10.0)
}

/// How per-threshold fractions are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapPooling {
    /// Every included joint of every frame is one sample.
    #[default]
    Pooled,
    /// Fraction per frame, then the mean over frames.
    PerFrameMean,
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) || thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "thresholds must be finite and ascending, got {thresholds:?}"
        )));
    }
    Ok(())
}

/// Fraction of joints with L2 error strictly below each threshold (mm).
pub fn map_metric(frames: &[(JointSet3D, JointSet3D)], thresholds: &[f64]) -> Result<Vec<f64>> {
    map_metric_with(frames, thresholds, MapPooling::Pooled)
}

pub fn map_metric_with(
    frames: &[(JointSet3D, JointSet3D)],
    thresholds: &[f64],
    pooling: MapPooling,
) -> Result<Vec<f64>> {
    check_thresholds(thresholds)?;
    let per_frame = frames
        .iter()
        .map(|(p, g)| Ok(joint_errors(p, g, Norm::L2)?.into_iter().flatten().collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    map_from_errors(&per_frame, thresholds, pooling)
}

fn map_from_errors(per_frame: &[Vec<f64>], thresholds: &[f64], pooling: MapPooling) -> Result<Vec<f64>> {
    let count_below = |errs: &[f64], t: f64| errs.iter().filter(|e| **e < t).count();
    match pooling {
        MapPooling::Pooled => {
            let total: usize = per_frame.iter().map(Vec::len).sum();
            if total == 0 {
                return Err(Error::EmptyEvaluation);
            }
            Ok(thresholds
                .iter()
                .map(|&t| {
                    per_frame.iter().map(|e| count_below(e, t)).sum::<usize>() as f64 / total as f64
                })
                .collect())
        }
        MapPooling::PerFrameMean => {
            let frames: Vec<&Vec<f64>> = per_frame.iter().filter(|e| !e.is_empty()).collect();
            if frames.is_empty() {
                return Err(Error::EmptyEvaluation);
            }
            Ok(thresholds
                .iter()
                .map(|&t| {
                    frames
                        .iter()
                        .map(|e| count_below(e, t) as f64 / e.len() as f64)
                        .sum::<f64>()
                        / frames.len() as f64
                })
                .collect())
        }
    }
}

/// Depth lookup used by the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthSampling {
    #[default]
    Nearest,
    /// Median of the valid pixels in the 3x3 window.
    Median3x3,
}

/// Lifts 2D joints to 3D by reading Z from the depth image at the rounded
/// pixel and backprojecting. Joints with no valid depth, or outside the
/// image, are marked invisible and placed at the origin.
pub fn baseline_2d_to_3d(
    names: &[String],
    pred_2d: &[Point2<f64>],
    depth: &DepthImage,
    k: &PinholeIntrinsics,
    sampling: DepthSampling,
) -> Result<JointSet3D> {
    if names.len() != pred_2d.len() {
        return Err(Error::JointMismatch(format!(
            "{} names for {} 2D joints",
            names.len(),
            pred_2d.len()
        )));
    }
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::DimensionMismatch {
            expected_w: k.width,
            expected_h: k.height,
            got_w: depth.width(),
            got_h: depth.height(),
        });
    }
    let joints = names
        .iter()
        .zip(pred_2d)
        .map(|(name, uv)| {
            let z = sample_depth(depth, uv, sampling);
            let (position, visible) = match z {
                Some(z) => (k.backproject_pixel(uv.x, uv.y, z), true),
                None => (Vector3::zeros(), false),
            };
            Joint {
                name: name.clone(),
                position,
                visible,
            }
        })
        .collect();
    Ok(JointSet3D::new(joints))
}

fn sample_depth(depth: &DepthImage, uv: &Point2<f64>, sampling: DepthSampling) -> Option<f64> {
    let (u, v) = (uv.x.round(), uv.y.round());
    if !(u >= 0.0 && v >= 0.0 && u < depth.width() as f64 && v < depth.height() as f64) {
        return None;
    }
    let (u, v) = (u as usize, v as usize);
    let z = match sampling {
        DepthSampling::Nearest => depth.get(u, v),
        DepthSampling::Median3x3 => {
            let mut vals: Vec<f32> = (v.saturating_sub(1)..=(v + 1).min(depth.height() - 1))
                .flat_map(|y| (u.saturating_sub(1)..=(u + 1).min(depth.width() - 1)).map(move |x| (x, y)))
                .map(|(x, y)| depth.get(x, y))
                .filter(|d| *d > 0.0)
                .collect();
            if vals.is_empty() {
                return None;
            }
            vals.sort_by(f32::total_cmp);
            let n = vals.len();
            if n % 2 == 1 {
                vals[n / 2]
            } else {
                (vals[n / 2 - 1] + vals[n / 2]) / 2.0
            }
        }
    };
    (z > 0.0).then_some(z as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.max(0.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddReport {
    pub l1: MeanStd,
    pub l2: MeanStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub threshold_mm: f64,
    pub fraction: f64,
}

/// Aggregate report. ADD values are in cm, std is over frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMetricsReport {
    pub add: AddReport,
    pub map: Vec<MapEntry>,
    pub frames: usize,
    pub joints: usize,
    /// Joints skipped because the ground truth marks them invisible.
    pub excluded: usize,
    /// Joints skipped because the prediction reports no detection.
    #[serde(default)]
    pub undetected: usize,
    #[serde(default)]
    pub pooling: MapPooling,
}

impl PoseMetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn check_invariants(&self) {
        assert!(
            self.map.windows(2).all(|w| w[0].fraction <= w[1].fraction),
            "mAP fractions must be non-decreasing in threshold"
        );
        assert!(self.map.iter().all(|m| (0.0..=1.0).contains(&m.fraction)));
        assert!(self.add.l1.std >= 0.0 && self.add.l2.std >= 0.0);
    }
}

/// Renders reports as a table: one row per method, mAP (%) per threshold
/// then ADD (cm) mean ± std for L1 and L2.
pub fn comparison_table(rows: &[(String, PoseMetricsReport)]) -> String {
    let thresholds: Vec<f64> = rows
        .first()
        .map(|(_, r)| r.map.iter().map(|m| m.threshold_mm).collect())
        .unwrap_or_default();
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Method");
    for t in &thresholds {
        let _ = write!(out, " | {:>7}", format!("@{t}mm"));
    }
    let _ = writeln!(out, " | {:>14} | {:>14}", "ADD L1 (cm)", "ADD L2 (cm)");
    let _ = writeln!(
        out,
        "{}",
        "-".repeat(name_w + thresholds.len() * 10 + 2 * 17)
    );
    for (name, r) in rows {
        let _ = write!(out, "{name:<name_w$}");
        for m in &r.map {
            let _ = write!(out, " | {:>7.1}", m.fraction * 100.0);
        }
        let _ = writeln!(
            out,
            " | {:>6.2} ± {:<5.2} | {:>6.2} ± {:<5.2}",
            r.add.l1.mean, r.add.l1.std, r.add.l2.mean, r.add.l2.std
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub thresholds_mm: Vec<f64>,
    pub pooling: MapPooling,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds_mm: DEFAULT_THRESHOLDS_MM.to_vec(),
            pooling: MapPooling::Pooled,
        }
    }
}

/// Frame identity shared by predictions and ground truth.
pub type FrameKey = (String, u64);

struct FrameEval {
    l1: Option<f64>,
    l2: Option<f64>,
    errors: Vec<f64>,
    excluded: usize,
    undetected: usize,
}

fn eval_frame(pred: &JointSet3D, gt: &JointSet3D) -> Result<FrameEval> {
    pred.check_aligned(gt)?;
    let mut l1 = Vec::new();
    let mut errors = Vec::new();
    let mut excluded = 0;
    let mut undetected = 0;
    for (p, g) in pred.joints.iter().zip(&gt.joints) {
        if !g.visible {
            excluded += 1;
        } else if !p.visible {
            undetected += 1;
        } else {
            let d = p.position - g.position;
            l1.push(Norm::L1.of(&d));
            errors.push(Norm::L2.of(&d));
        }
    }
    let mean_cm = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64 / 10.0);
    let (a1, a2) = (mean_cm(&l1), mean_cm(&errors));
    if let (Some(a1), Some(a2)) = (a1, a2) {
        assert!(a1 >= a2 - 1e-9, "ADD L1 {a1} below ADD L2 {a2}");
    }
    Ok(FrameEval {
        l1: a1,
        l2: a2,
        errors,
        excluded,
        undetected,
    })
}

/// Evaluates predictions against ground truth on their common frames.
///
/// Every predicted frame must exist in the ground truth. Frames where no
/// joint is included do not contribute to ADD.
pub fn evaluate_run(
    pred: &BTreeMap<FrameKey, JointSet3D>,
    gt: &BTreeMap<FrameKey, JointSet3D>,
    config: &EvalConfig,
) -> Result<PoseMetricsReport> {
    check_thresholds(&config.thresholds_mm)?;
    if let Some((seq, id)) = pred.keys().find(|k| !gt.contains_key(*k)) {
        return Err(Error::FrameMismatch(format!(
            "prediction for {seq}/{id} has no ground truth"
        )));
    }
    let pairs: Vec<(&JointSet3D, &JointSet3D)> =
        pred.iter().map(|(k, p)| (p, &gt[k])).collect();
    if pairs.is_empty() {
        return Err(Error::FrameMismatch("no frames in common".into()));
    }
    let evals = pairs
        .par_iter()
        .map(|(p, g)| eval_frame(p, g))
        .collect::<Result<Vec<_>>>()?;
    let l1: Vec<f64> = evals.iter().filter_map(|e| e.l1).collect();
    let l2: Vec<f64> = evals.iter().filter_map(|e| e.l2).collect();
    if l2.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let per_frame: Vec<Vec<f64>> = evals.iter().map(|e| e.errors.clone()).collect();
    let fractions = map_from_errors(&per_frame, &config.thresholds_mm, config.pooling)?;
    let report = PoseMetricsReport {
        add: AddReport {
            l1: MeanStd::of(&l1),
            l2: MeanStd::of(&l2),
        },
        map: config
            .thresholds_mm
            .iter()
            .zip(fractions)
            .map(|(&threshold_mm, fraction)| MapEntry {
                threshold_mm,
                fraction,
            })
            .collect(),
        frames: l2.len(),
        joints: evals.iter().map(|e| e.errors.len()).sum(),
        excluded: evals.iter().map(|e| e.excluded).sum(),
        undetected: evals.iter().map(|e| e.undetected).sum(),
        pooling: config.pooling,
    };
    report.check_invariants();
    Ok(report)
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sequence: String,
    pub frame_id: u64,
    pub joints: Vec<JointRecord>,
}

impl PredictionRecord {
    pub fn key(&self) -> FrameKey {
        (self.sequence.clone(), self.frame_id)
    }
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).at(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").at(path)?;
    }
    f.flush().at(path)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let f = BufReader::new(std::fs::File::open(path).at(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Annotation {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Keys predictions by frame; duplicate frames are an error.
pub fn predictions_by_frame(records: Vec<PredictionRecord>) -> Result<BTreeMap<FrameKey, JointSet3D>> {
    let mut map = BTreeMap::new();
    for r in records {
        let key = r.key();
        if map.insert(key.clone(), JointSet3D::from_records(r.joints)).is_some() {
            return Err(Error::FrameMismatch(format!("duplicate prediction for {}/{}", key.0, key.1)));
        }
    }
    Ok(map)
}
