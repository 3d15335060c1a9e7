//! On-disk frame sets: TOML manifest, per-sequence annotation JSON Lines and
//! 16-bit depth PNGs.
//!
//! ```text
//! root/
//!   manifest.toml
//!   chain.json                  (optional)
//!   <sequence>/camera.json
//!   <sequence>/annotations.jsonl
//!   <sequence>/depth/000000.png
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::geometry::{DepthImage, PinholeIntrinsics, RigidPose};
use crate::joints::{JointRecord, JointSet3D};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const FORMAT_NAME: &str = "spdh-frames";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    #[serde(default = "default_max_range")]
    pub max_range_mm: f32,
    pub joint_names: Vec<String>,
    #[serde(default)]
    pub sequences: Vec<SequenceEntry>,
}

fn default_max_range() -> f32 {
    crate::geometry::DEFAULT_MAX_RANGE_MM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub id: String,
    pub annotations: String,
    pub frames: usize,
}

/// Intrinsics plus the camera's pose in the world (world <- camera).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    #[serde(flatten)]
    pub intrinsics: PinholeIntrinsics,
    pub pose: RigidPose,
}

/// One line of `annotations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame_id: u64,
    pub sequence: String,
    /// Depth file relative to the sequence directory.
    pub depth: String,
    pub joints: Vec<JointRecord>,
    pub camera: CameraRecord,
    pub seed: u64,
}

/// A frame indexed from disk. Depth is read on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub sequence: String,
    pub depth_path: PathBuf,
    pub joints: JointSet3D,
    pub camera: CameraRecord,
    pub seed: u64,
}

impl FrameRecord {
    pub fn load_depth(&self, max_range: f32) -> Result<DepthImage> {
        if !self.depth_path.exists() {
            return Err(Error::Dataset(format!(
                "sequence {} frame {}: depth file {} is missing",
                self.sequence,
                self.frame_id,
                self.depth_path.display()
            )));
        }
        DepthImage::read(&self.depth_path, max_range)
    }

    pub fn key(&self) -> (String, u64) {
        (self.sequence.clone(), self.frame_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.sequences.iter().flat_map(|s| s.frames.iter())
    }

    pub fn num_frames(&self) -> usize {
        self.sequences.iter().map(|s| s.frames.len()).sum()
    }

    pub fn chain_path(&self) -> Option<PathBuf> {
        self.manifest.chain.as_ref().map(|c| self.root.join(c))
    }
}

/// Indexes a dataset root, validating every annotation line.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(root.to_path_buf()));
    }
    let manifest: Manifest =
        toml::from_str(&std::fs::read_to_string(&manifest_path).at(&manifest_path)?)?;
    if manifest.format != FORMAT_NAME {
        return Err(Error::Dataset(format!(
            "unknown format {:?} in {}",
            manifest.format,
            manifest_path.display()
        )));
    }
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for entry in &manifest.sequences {
        let path = root.join(&entry.annotations);
        let seq_dir = path.parent().unwrap_or(root).to_path_buf();
        let reader = BufReader::new(File::open(&path).at(&path)?);
        let mut frames = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.at(&path)?;
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| Error::Annotation {
                path: path.clone(),
                line: n + 1,
                message: format!("sequence {}: {message}", entry.id),
            };
            let record: AnnotationRecord =
                serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            if record.joints.len() != manifest.joint_names.len() {
                return Err(fail(format!(
                    "{} joints, manifest declares {}",
                    record.joints.len(),
                    manifest.joint_names.len()
                )));
            }
            if let Some((r, m)) = record
                .joints
                .iter()
                .zip(&manifest.joint_names)
                .find(|(r, m)| &r.name != *m)
            {
                return Err(fail(format!("joint {:?} where manifest has {:?}", r.name, m)));
            }
            if record.sequence != entry.id {
                return Err(fail(format!("record belongs to sequence {:?}", record.sequence)));
            }
            record.camera.intrinsics.validate().map_err(|e| fail(e.to_string()))?;
            frames.push(FrameRecord {
                frame_id: record.frame_id,
                sequence: record.sequence,
                depth_path: seq_dir.join(&record.depth),
                joints: JointSet3D::from_records(record.joints),
                camera: record.camera,
                seed: record.seed,
            });
        }
        if frames.len() != entry.frames {
            return Err(Error::Dataset(format!(
                "sequence {} lists {} frames but {} has {}",
                entry.id,
                entry.frames,
                path.display(),
                frames.len()
            )));
        }
        sequences.push(Sequence {
            id: entry.id.clone(),
            frames,
        });
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        manifest,
        sequences,
    })
}

/// Builds a dataset directory sequence by sequence.
pub struct DatasetWriter {
    root: PathBuf,
    manifest: Manifest,
}

impl DatasetWriter {
    pub fn create(root: impl AsRef<Path>, joint_names: Vec<String>, max_range_mm: f32) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root).at(&root)?;
        Ok(Self {
            root,
            manifest: Manifest {
                format: FORMAT_NAME.into(),
                version: 1,
                units: "mm".into(),
                chain: None,
                max_range_mm,
                joint_names,
                sequences: Vec::new(),
            },
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_chain(&mut self, chain: &crate::robot::RobotChain) -> Result<()> {
        chain.save(self.root.join("chain.json"))?;
        self.manifest.chain = Some("chain.json".into());
        Ok(())
    }

    pub fn sequence(&mut self, id: &str) -> Result<SequenceWriter<'_>> {
        if self.manifest.sequences.iter().any(|s| s.id == id) {
            return Err(Error::Dataset(format!("duplicate sequence id {id:?}")));
        }
        let dir = self.root.join(id);
        let depth_dir = dir.join("depth");
        std::fs::create_dir_all(&depth_dir).at(&depth_dir)?;
        let path = dir.join(ANNOTATIONS_FILE);
        let out = BufWriter::new(File::create(&path).at(&path)?);
        Ok(SequenceWriter {
            owner: self,
            id: id.to_string(),
            dir,
            path,
            out,
            frames: 0,
            camera_written: false,
        })
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, toml::to_string(&self.manifest)?).at(&path)?;
        Ok(self.root)
    }
}

pub struct SequenceWriter<'a> {
    owner: &'a mut DatasetWriter,
    id: String,
    dir: PathBuf,
    path: PathBuf,
    out: BufWriter<File>,
    frames: usize,
    camera_written: bool,
}

impl SequenceWriter<'_> {
    /// Writes the depth PNG and appends the annotation line. `record.depth`
    /// and `record.sequence` are filled in here.
    pub fn push(&mut self, mut record: AnnotationRecord, depth: &DepthImage) -> Result<()> {
        record.sequence = self.id.clone();
        record.depth = format!("depth/{:06}.png", record.frame_id);
        depth.write_png(self.dir.join(&record.depth))?;
        self.push_record(record)
    }

    /// Appends an annotation whose depth file is already in place.
    pub fn push_record(&mut self, record: AnnotationRecord) -> Result<()> {
        if !self.camera_written {
            let cam = self.dir.join("camera.json");
            std::fs::write(&cam, serde_json::to_string_pretty(&record.camera.intrinsics)?)
                .at(&cam)?;
            self.camera_written = true;
        }
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n").at(&self.path)?;
        self.frames += 1;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().at(&self.path)?;
        self.owner.manifest.sequences.push(SequenceEntry {
            id: self.id.clone(),
            annotations: format!("{}/{}", self.id, ANNOTATIONS_FILE),
            frames: self.frames,
        });
        Ok(self.frames)
    }
}

/// Writes a loaded dataset to a new root, copying depth files.
pub fn save_dataset(dataset: &Dataset, root: impl AsRef<Path>) -> Result<()> {
    let mut writer = DatasetWriter::create(
        root,
        dataset.manifest.joint_names.clone(),
        dataset.manifest.max_range_mm,
    )?;
    if let Some(chain) = dataset.chain_path() {
        writer.set_chain(&crate::robot::RobotChain::load(chain)?)?;
    }
    for seq in &dataset.sequences {
        let mut sw = writer.sequence(&seq.id)?;
        for f in &seq.frames {
            let rel = format!("depth/{:06}.{}", f.frame_id, extension_of(&f.depth_path));
            let dst = sw.dir().join(&rel);
            std::fs::copy(&f.depth_path, &dst).at(&f.depth_path)?;
            sw.push_record(AnnotationRecord {
                frame_id: f.frame_id,
                sequence: seq.id.clone(),
                depth: rel,
                joints: f.joints.to_records(),
                camera: f.camera,
                seed: f.seed,
            })?;
        }
        sw.finish()?;
    }
    writer.finish()?;
    Ok(())
}

fn extension_of(p: &Path) -> String {
    p.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("png")
        .to_string()
}

/// Keeps frames `0, stride, 2 * stride, ...` of each sequence.
pub fn sample_every(sequences: &[Sequence], stride: usize) -> Result<Vec<Sequence>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    Ok(sequences
        .iter()
        .map(|s| Sequence {
            id: s.id.clone(),
            frames: s.frames.iter().step_by(stride).cloned().collect(),
        })
        .collect())
}

/// Sequence-level partition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitSpec {
    /// First `train` ids to train, next `val` to validation, the rest to test.
    pub fn by_counts(ids: &[String], train: usize, val: usize) -> Result<Self> {
        if train + val > ids.len() {
            return Err(Error::InvalidSplit(format!(
                "{train} + {val} sequences requested from {}",
                ids.len()
            )));
        }
        Ok(Self {
            train: ids[..train].to_vec(),
            val: ids[train..train + val].to_vec(),
            test: ids[train + val..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<Sequence>,
    pub val: Vec<Sequence>,
    pub test: Vec<Sequence>,
}

pub fn split(sequences: &[Sequence], spec: &SplitSpec) -> Result<Splits> {
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (name, ids) in [("train", &spec.train), ("val", &spec.val), ("test", &spec.test)] {
        for id in ids {
            if let Some(prev) = owner.insert(id, name) {
                return Err(Error::InvalidSplit(format!(
                    "sequence {id:?} assigned to both {prev} and {name}"
                )));
            }
        }
    }
    let known: BTreeSet<&str> = sequences.iter().map(|s| s.id.as_str()).collect();
    if let Some(unknown) = owner.keys().find(|id| !known.contains(*id)) {
        return Err(Error::InvalidSplit(format!("unknown sequence {unknown:?}")));
    }
    if let Some(missing) = known.iter().find(|id| !owner.contains_key(*id)) {
        return Err(Error::InvalidSplit(format!("sequence {missing:?} is not assigned")));
    }
    let pick = |which: &str| {
        sequences
            .iter()
            .filter(|s| owner[s.id.as_str()] == which)
            .cloned()
            .collect::<Vec<_>>()
    };
    Ok(Splits {
        train: pick("train"),
        val: pick("val"),
        test: pick("test"),
    })
}

/// Imports externally recorded frames: a directory of depth PNGs and a CSV
/// with columns `frame_id,depth,<joint>_x,<joint>_y,<joint>_z,...` (an
/// optional `<joint>_visible` column per joint is honored). Joint names are
/// taken from the header order.
pub fn convert(
    depth_dir: impl AsRef<Path>,
    joints_csv: impl AsRef<Path>,
    camera: &CameraRecord,
    sequence_id: &str,
    out_root: impl AsRef<Path>,
) -> Result<Dataset> {
    let depth_dir = depth_dir.as_ref();
    let csv_path = joints_csv.as_ref();
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let frame_col = col("frame_id").ok_or_else(|| Error::Format {
        path: csv_path.to_path_buf(),
        message: "missing frame_id column".into(),
    })?;
    let depth_col = col("depth").ok_or_else(|| Error::Format {
        path: csv_path.to_path_buf(),
        message: "missing depth column".into(),
    })?;
    let mut names = Vec::new();
    for h in headers.iter() {
        if let Some(base) = h.strip_suffix("_x") {
            if col(&format!("{base}_y")).is_some() && col(&format!("{base}_z")).is_some() {
                names.push(base.to_string());
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Format {
            path: csv_path.to_path_buf(),
            message: "no <joint>_x/_y/_z column triplets".into(),
        });
    }
    let mut writer = DatasetWriter::create(&out_root, names.clone(), default_max_range())?;
    let mut sw = writer.sequence(sequence_id)?;
    for (n, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |message: String| Error::Annotation {
            path: csv_path.to_path_buf(),
            line: n + 2,
            message,
        };
        let num = |name: String| -> Result<f64> {
            let i = col(&name).expect("column located from header");
            row.get(i)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("{name}: {e}")))
        };
        let frame_id: u64 = row
            .get(frame_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| bad(format!("frame_id: {e}")))?;
        let mut joints = Vec::with_capacity(names.len());
        for name in &names {
            let visible = match col(&format!("{name}_visible")) {
                Some(i) => !matches!(row.get(i).unwrap_or("1").trim(), "0" | "false"),
                None => true,
            };
            joints.push(JointRecord {
                name: name.clone(),
                xyz_mm: [
                    num(format!("{name}_x"))?,
                    num(format!("{name}_y"))?,
                    num(format!("{name}_z"))?,
                ],
                visible,
            });
        }
        let src = depth_dir.join(row.get(depth_col).unwrap_or("").trim());
        let depth = DepthImage::read_png(&src, default_max_range())?;
        sw.push(
            AnnotationRecord {
                frame_id,
                sequence: sequence_id.into(),
                depth: String::new(),
                joints,
                camera: *camera,
                seed: 0,
            },
            &depth,
        )?;
    }
    sw.finish()?;
    let root = writer.finish()?;
    load_dataset(root)
}
