use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Heatmap, ZQuantization};
use crate::error::{Error, IoContext, Result};

const RAW_MAGIC: &[u8; 8] = b"SPDHSTCK";

/// Heatmap pair stack for `n` joints: `n` uv maps (`h x w`) and `n` uz maps
/// (`num_slices x w`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdhStack {
    pub uv_maps: Vec<Heatmap>,
    pub uz_maps: Vec<Heatmap>,
    pub quant: ZQuantization,
    pub sigma_m: f64,
    pub joint_names: Vec<String>,
}

/// Everything about a stack except the map values. Stored as the JSON
/// sidecar next to serialized maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackMeta {
    pub quant: ZQuantization,
    pub sigma_m: f64,
    pub joint_names: Vec<String>,
}

impl SpdhStack {
    pub fn num_joints(&self) -> usize {
        self.uv_maps.len()
    }

    /// `(width, height)` of the uv maps.
    pub fn uv_shape(&self) -> (usize, usize) {
        self.uv_maps
            .first()
            .map(|m| (m.width, m.height))
            .unwrap_or((0, 0))
    }

    pub fn meta(&self) -> StackMeta {
        StackMeta {
            quant: self.quant,
            sigma_m: self.sigma_m,
            joint_names: self.joint_names.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.uv_maps.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("stack has no joints".into()));
        }
        if self.uz_maps.len() != n || self.joint_names.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} uv maps, {} uz maps, {} names",
                self.uz_maps.len(),
                self.joint_names.len()
            )));
        }
        let (w, h) = self.uv_shape();
        for (i, (uv, uz)) in self.uv_maps.iter().zip(&self.uz_maps).enumerate() {
            if uv.width != w || uv.height != h || uv.data.len() != w * h {
                return Err(Error::ShapeMismatch(format!("uv map {i} is not {w}x{h}")));
            }
            if uz.width != w || uz.height != self.quant.num_slices() || uz.data.len() != w * uz.height
            {
                return Err(Error::ShapeMismatch(format!(
                    "uz map {i} is not {w}x{}",
                    self.quant.num_slices()
                )));
            }
            let bad = uv
                .data
                .iter()
                .chain(&uz.data)
                .any(|v| !v.is_finite() || *v < 0.0);
            if bad {
                return Err(Error::ShapeMismatch(format!(
                    "map {i} holds negative or non-finite values"
                )));
            }
        }
        Ok(())
    }

    /// Raw container: `SPDHSTCK`, u32 n, h, w, num_slices, then all uv maps
    /// and all uz maps as little-endian f32.
    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let (w, h) = self.uv_shape();
        let mut out = BufWriter::new(File::create(path).at(path)?);
        let mut header = Vec::with_capacity(24);
        header.extend_from_slice(RAW_MAGIC);
        for v in [self.num_joints(), h, w, self.quant.num_slices()] {
            header.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.write_all(&header).at(path)?;
        let mut buf = Vec::with_capacity(w * h * 4);
        for map in self.uv_maps.iter().chain(&self.uz_maps) {
            buf.clear();
            buf.extend(map.data.iter().flat_map(|v| (*v as f32).to_le_bytes()));
            out.write_all(&buf).at(path)?;
        }
        out.flush().at(path)
    }

    pub fn read_raw(path: impl AsRef<Path>, meta: &StackMeta) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .at(path)?;
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < 24 || &bytes[..8] != RAW_MAGIC {
            return Err(bad("missing SPDHSTCK header".into()));
        }
        let field = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
        let (n, h, w, slices) = (field(0), field(1), field(2), field(3));
        if n != meta.joint_names.len() || slices != meta.quant.num_slices() {
            return Err(bad(format!(
                "header says {n} joints / {slices} slices, sidecar says {} / {}",
                meta.joint_names.len(),
                meta.quant.num_slices()
            )));
        }
        let expected = n * (h * w + slices * w) * 4;
        if bytes.len() - 24 != expected {
            return Err(bad(format!(
                "payload is {} bytes, expected {expected}",
                bytes.len() - 24
            )));
        }
        let mut values = bytes[24..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        let mut take = |width: usize, height: usize| Heatmap {
            width,
            height,
            data: values.by_ref().take(width * height).collect(),
        };
        let uv_maps = (0..n).map(|_| take(w, h)).collect();
        let uz_maps = (0..n).map(|_| take(w, slices)).collect();
        let stack = Self {
            uv_maps,
            uz_maps,
            quant: meta.quant,
            sigma_m: meta.sigma_m,
            joint_names: meta.joint_names.clone(),
        };
        stack.validate()?;
        Ok(stack)
    }

    /// Writes `<prefix>.uv.png` and `<prefix>.uz.png` (one animated 16-bit
    /// grayscale PNG per space, one frame per joint, values `round(v * 65535)`)
    /// and the `<prefix>.json` sidecar.
    pub fn write_png(&self, prefix: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let paths = PngPaths::new(prefix.as_ref());
        write_pages(&paths.uv, &self.uv_maps)?;
        write_pages(&paths.uz, &self.uz_maps)?;
        std::fs::write(&paths.meta, serde_json::to_string_pretty(&self.meta())?).at(&paths.meta)
    }

    pub fn read_png(prefix: impl AsRef<Path>) -> Result<Self> {
        let paths = PngPaths::new(prefix.as_ref());
        let meta: StackMeta =
            serde_json::from_str(&std::fs::read_to_string(&paths.meta).at(&paths.meta)?)?;
        let uv_maps = read_pages(&paths.uv)?;
        let uz_maps = read_pages(&paths.uz)?;
        let stack = Self {
            uv_maps,
            uz_maps,
            quant: meta.quant,
            sigma_m: meta.sigma_m,
            joint_names: meta.joint_names,
        };
        stack.validate()?;
        Ok(stack)
    }
}

struct PngPaths {
    uv: PathBuf,
    uz: PathBuf,
    meta: PathBuf,
}

impl PngPaths {
    fn new(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            uv: with(".uv.png"),
            uz: with(".uz.png"),
            meta: with(".json"),
        }
    }
}

fn quantize_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn write_pages(path: &Path, maps: &[Heatmap]) -> Result<()> {
    let (w, h) = (maps[0].width, maps[0].height);
    let file = File::create(path).at(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    encoder.set_animated(maps.len() as u32, 0)?;
    let mut writer = encoder.write_header()?;
    for map in maps {
        let bytes: Vec<u8> = map
            .data
            .iter()
            .flat_map(|v| quantize_u16(*v).to_be_bytes())
            .collect();
        writer.write_image_data(&bytes)?;
    }
    writer.finish()?;
    Ok(())
}

fn read_pages(path: &Path) -> Result<Vec<Heatmap>> {
    let file = File::open(path).at(path)?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "expected 16-bit grayscale pages".into(),
        });
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let pages = info.animation_control.map(|a| a.num_frames).unwrap_or(1) as usize;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let mut maps = Vec::with_capacity(pages);
    for _ in 0..pages {
        reader.next_frame(&mut buf)?;
        maps.push(Heatmap {
            width: w,
            height: h,
            data: buf[..w * h * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
                .collect(),
        });
    }
    Ok(maps)
}
