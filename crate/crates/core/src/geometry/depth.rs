use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, IoContext, Result};

/// Default maximum sensor range in millimeters.
pub const DEFAULT_MAX_RANGE_MM: f32 = 8000.0;

const RAW_MAGIC: &[u8; 8] = b"SPDHDPTH";

/// Row-major Z-depth grid in millimeters. Zero marks "no return".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    max_range: f32,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn zeros(width: usize, height: usize, max_range: f32) -> Self {
        Self {
            width,
            height,
            max_range,
            data: vec![0.0; width * height],
        }
    }

    /// Wraps `data`, rejecting negative, non-finite or out-of-range values.
    pub fn from_vec(width: usize, height: usize, max_range: f32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "depth buffer has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if !(max_range > 0.0 && max_range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "max range must be positive, got {max_range}"
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|d| !d.is_finite() || **d < 0.0 || **d > max_range)
        {
            return Err(Error::InvalidParameter(format!(
                "depth value {bad} outside [0, {max_range}]"
            )));
        }
        Ok(Self {
            width,
            height,
            max_range,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_range(&self) -> f32 {
        self.max_range
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    /// Sets a pixel; values outside `[0, max_range]` become the zero sentinel.
    #[inline]
    pub fn set(&mut self, u: usize, v: usize, depth: f32) {
        let d = if depth.is_finite() && depth > 0.0 && depth <= self.max_range {
            depth
        } else {
            0.0
        };
        self.data[v * self.width + u] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    /// Nearest-neighbor resampling to `new_w` x `new_h`.
    ///
    /// Output pixel `(x, y)` copies the source pixel whose footprint contains
    /// the output pixel center, so no new depth values are created.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> Result<Self> {
        if new_w == 0 || new_h == 0 {
            return Err(Error::InvalidParameter(format!(
                "resize target {new_w}x{new_h} must be positive"
            )));
        }
        if new_w == self.width && new_h == self.height {
            return Ok(self.clone());
        }
        let src_x: Vec<usize> = (0..new_w)
            .map(|x| nearest_source(x, self.width, new_w))
            .collect();
        let mut data = Vec::with_capacity(new_w * new_h);
        for y in 0..new_h {
            let sy = nearest_source(y, self.height, new_h);
            let row = &self.data[sy * self.width..(sy + 1) * self.width];
            data.extend(src_x.iter().map(|&sx| row[sx]));
        }
        Ok(Self {
            width: new_w,
            height: new_h,
            max_range: self.max_range,
            data,
        })
    }

    /// Reads a 16-bit grayscale PNG where one unit is one millimeter.
    pub fn read_png(path: impl AsRef<Path>, max_range: f32) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).at(path)?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info()?;
        let info = reader.info();
        if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "expected 16-bit grayscale, found {:?} {:?}",
                    info.bit_depth, info.color_type
                ),
            });
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let mut buf = vec![0u8; reader.output_buffer_size()];
        reader.next_frame(&mut buf)?;
        let data = buf[..w * h * 2]
            .chunks_exact(2)
            .map(|c| {
                let d = u16::from_be_bytes([c[0], c[1]]) as f32;
                if d > max_range {
                    0.0
                } else {
                    d
                }
            })
            .collect();
        Self::from_vec(w, h, max_range, data)
    }

    /// Writes a 16-bit grayscale PNG, rounding to whole millimeters.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).at(path)?;
        let mut encoder =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Sixteen);
        let mut writer = encoder.write_header()?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .flat_map(|d| (d.round().clamp(0.0, u16::MAX as f32) as u16).to_be_bytes())
            .collect();
        writer.write_image_data(&bytes)?;
        writer.finish()?;
        Ok(())
    }

    /// Reads the raw float format: `SPDHDPTH`, u32 width, u32 height, then
    /// little-endian f32 values row by row.
    pub fn read_raw(path: impl AsRef<Path>, max_range: f32) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .at(path)?;
        let bad = |message: &str| Error::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
            return Err(bad("missing SPDHDPTH header"));
        }
        let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let payload = &bytes[16..];
        if payload.len() != w * h * 4 {
            return Err(bad("payload size does not match header dimensions"));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_vec(w, h, max_range, data)
    }

    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).at(path)?);
        let mut header = Vec::with_capacity(16);
        header.extend_from_slice(RAW_MAGIC);
        header.extend_from_slice(&(self.width as u32).to_le_bytes());
        header.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.write_all(&header).at(path)?;
        for d in &self.data {
            out.write_all(&d.to_le_bytes()).at(path)?;
        }
        out.flush().at(path)
    }

    /// Dispatches on extension: `.png` or anything else as raw.
    pub fn read(path: impl AsRef<Path>, max_range: f32) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => Self::read_png(path, max_range),
            _ => Self::read_raw(path, max_range),
        }
    }
}

#[inline]
fn nearest_source(dst: usize, src_len: usize, dst_len: usize) -> usize {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as usize;
    s.min(src_len - 1)
}
