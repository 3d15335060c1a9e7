//! Run configuration: a TOML file with command-line overrides on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spdh::augment::{AugmentSpec, Pivot};
use spdh::codec::{Refinement, ZQuantization};
use spdh::geometry::PinholeIntrinsics;
use spdh::metrics::{DepthSampling, MapPooling, DEFAULT_THRESHOLDS_MM};

pub const CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdhParams {
    pub z_min: f64,
    pub z_max: f64,
    pub delta_z: f64,
    pub sigma_m: f64,
}

impl Default for SpdhParams {
    fn default() -> Self {
        Self {
            z_min: 500.0,
            z_max: 3380.0,
            delta_z: 15.0,
            sigma_m: 50.0,
        }
    }
}

/// Heatmap resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
}

impl Default for InputShape {
    fn default() -> Self {
        Self {
            height: 192,
            width: 384,
        }
    }
}

impl std::str::FromStr for InputShape {
    type Err = String;

    /// Parses `HxW`, e.g. `192x384`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (h, w) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| format!("bad dimension {v:?} in {s:?}"))
        };
        Ok(Self {
            height: parse(h)?,
            width: parse(w)?,
        })
    }
}

/// Augmentation ranges. The generator is seeded from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub enabled: bool,
    pub rot_range_deg: [f64; 2],
    pub trans_range_mm: [f64; 2],
    pub pivot: Pivot,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentSpec::default();
        Self {
            enabled: false,
            rot_range_deg: d.rot_range_deg,
            trans_range_mm: d.trans_range_mm,
            pivot: d.pivot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub frames: usize,
    pub sequences: usize,
    pub motions: usize,
    pub jitter_diameter_mm: f64,
    pub noise_stddev_mm: f64,
    pub dropout: f64,
    pub ground_plane: bool,
    pub table: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            frames: 100,
            sequences: 1,
            motions: 10,
            jitter_diameter_mm: 1000.0,
            noise_stddev_mm: 3.0,
            dropout: 0.01,
            ground_plane: true,
            table: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    pub peak_threshold: f64,
    pub refinement: Refinement,
    pub baseline_sampling: DepthSampling,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            peak_threshold: 0.1,
            refinement: Refinement::None,
            baseline_sampling: DepthSampling::Nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thresholds_mm: Vec<f64>,
    pub pooling: MapPooling,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds_mm: DEFAULT_THRESHOLDS_MM.to_vec(),
            pooling: MapPooling::Pooled,
        }
    }
}

/// Everything that determines a run's outputs. Output locations are not
/// part of it, so the dumped file can be replayed elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Camera intrinsics JSON. When unset, synthesis uses the built-in
    /// desk camera and the other commands use each sequence's camera.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<PathBuf>,
    pub spdh: SpdhParams,
    pub input: InputShape,
    pub augment: AugmentSection,
    pub synth: SynthSection,
    pub decode: DecodeSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            camera: None,
            spdh: SpdhParams::default(),
            input: InputShape::default(),
            augment: AugmentSection::default(),
            synth: SynthSection::default(),
            decode: DecodeSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file. A relative camera path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let (Some(cam), Some(dir)) = (&cfg.camera, path.parent()) {
            if cam.is_relative() {
                cfg.camera = Some(dir.join(cam));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Writes the effective config into `dir`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.quantization()?;
        if !(self.spdh.sigma_m > 0.0 && self.spdh.sigma_m.is_finite()) {
            bail!("sigma_m must be positive, got {}", self.spdh.sigma_m);
        }
        if let Some(cam) = &self.camera {
            if !cam.is_file() {
                bail!("camera file {} does not exist", cam.display());
            }
        }
        self.augment_spec().validate()?;
        let t = &self.eval.thresholds_mm;
        if t.is_empty() || t.windows(2).any(|w| w[0] > w[1]) {
            bail!("thresholds must be a non-empty ascending list, got {t:?}");
        }
        if !self.decode.peak_threshold.is_finite() {
            bail!("peak threshold must be finite");
        }
        Ok(())
    }

    pub fn quantization(&self) -> Result<ZQuantization> {
        Ok(ZQuantization::new(self.spdh.z_min, self.spdh.z_max, self.spdh.delta_z)?)
    }

    pub fn augment_spec(&self) -> AugmentSpec {
        AugmentSpec {
            rot_range_deg: self.augment.rot_range_deg,
            trans_range_mm: self.augment.trans_range_mm,
            pivot: self.augment.pivot,
            seed: self.seed,
        }
    }

    pub fn camera_override(&self) -> Result<Option<PinholeIntrinsics>> {
        self.camera
            .as_ref()
            .map(|p| PinholeIntrinsics::load(p).with_context(|| format!("loading camera {}", p.display())))
            .transpose()
    }

    /// Intrinsics at heatmap resolution for a sensor camera.
    pub fn heatmap_intrinsics(&self, sensor: &PinholeIntrinsics) -> PinholeIntrinsics {
        sensor.scaled(self.input.width, self.input.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.quantization().unwrap().num_slices(), 192);
    }

    #[test]
    fn shape_parsing() {
        let s: InputShape = "192x384".parse().unwrap();
        assert_eq!((s.height, s.width), (192, 384));
        assert!("192".parse::<InputShape>().is_err());
        assert!("0x4".parse::<InputShape>().is_err());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 3\n[spdh]\nz_min = 0.0\nz_max = 5760.0\ndelta_z = 30.0\nsigma_m = 50.0\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.quantization().unwrap().num_slices(), 192);
        assert_eq!(cfg.input, InputShape::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        let mut cfg = RunConfig::default();
        cfg.spdh.delta_z = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.camera = Some("/nonexistent/camera.json".into());
        assert!(cfg.validate().is_err());
    }
}
