//! 8-bit PNG renderings of depth, XYZ channels, heatmaps and joint overlays.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use spdh::codec::Heatmap;
use spdh::geometry::DepthImage;

pub const MARKER_RGB: [u8; 3] = [255, 0, 0];
pub const BONE_RGB: [u8; 3] = [255, 255, 255];

/// Row-major RGB canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[u8; 3]>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0; 3]; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.rgb[y * self.width + x]
    }

    pub fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.rgb[y as usize * self.width + x as usize] = c;
        }
    }

    /// Plus-shaped marker centered on the pixel nearest `(u, v)`.
    pub fn marker(&mut self, u: f64, v: f64, c: [u8; 3]) {
        let (x, y) = (u.round() as i64, v.round() as i64);
        for d in -2..=2 {
            self.put(x + d, y, c);
            self.put(x, y + d, c);
        }
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let x = a.0 + (b.0 - a.0) * t;
            let y = a.1 + (b.1 - a.1) * t;
            self.put(x.round() as i64, y.round() as i64, c);
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.rgb.iter().flatten().copied().collect();
        write_png(path, self.width, self.height, png::ColorType::Rgb, &bytes)
    }
}

fn write_png(path: &Path, w: usize, h: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Heatmap values in [0, 1] mapped linearly to gray.
pub fn save_heatmap(map: &Heatmap, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = map.data.iter().map(|v| to_u8(*v)).collect();
    write_png(path, map.width, map.height, png::ColorType::Grayscale, &bytes)
}

/// Single channel in [0, 1] as gray.
pub fn save_channel(values: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = values.iter().map(|v| to_u8(*v)).collect();
    write_png(path, width, height, png::ColorType::Grayscale, &bytes)
}

/// Blue (near) to red (far) ramp; `t` in [0, 1].
pub fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let r = (1.5 - (4.0 * t - 3.0).abs()).clamp(0.0, 1.0);
    let g = (1.5 - (4.0 * t - 2.0).abs()).clamp(0.0, 1.0);
    let b = (1.5 - (4.0 * t - 1.0).abs()).clamp(0.0, 1.0);
    [to_u8(r), to_u8(g), to_u8(b)]
}

/// Depth colored between its valid min and max; invalid pixels are black.
pub fn depth_canvas(depth: &DepthImage) -> Canvas {
    let valid = depth.data().iter().filter(|d| **d > 0.0);
    let (lo, hi) = valid.fold((f32::INFINITY, 0.0f32), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    let span = (hi - lo).max(1.0) as f64;
    Canvas {
        width: depth.width(),
        height: depth.height(),
        rgb: depth
            .data()
            .iter()
            .map(|d| if *d > 0.0 { colormap((*d - lo) as f64 / span) } else { [0; 3] })
            .collect(),
    }
}

/// Gray background from the pixelwise max of `maps`.
pub fn heatmap_canvas(maps: &[Heatmap]) -> Canvas {
    let (w, h) = maps.first().map(|m| (m.width, m.height)).unwrap_or((0, 0));
    let mut c = Canvas::new(w, h);
    for (i, px) in c.rgb.iter_mut().enumerate() {
        let v = to_u8(maps.iter().map(|m| m.data[i]).fold(0.0, f64::max));
        *px = [v; 3];
    }
    c
}
