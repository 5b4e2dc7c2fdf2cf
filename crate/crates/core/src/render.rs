//! Raster helpers: grayscale/RGB slices, a perceptual colormap, tiling,
//! scatter plots and PNG output.

use crate::dataio::Volume;
use crate::error::{Error, Result};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

/// RGB image with channels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, color: [f64; 3]) {
        if row < self.height && col < self.width {
            self.pixels[row * self.width + col] = color;
        }
    }

    /// 8-bit interleaved RGB bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut encoder = png::Encoder::new(file, self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&self.to_bytes())?;
        writer.finish()?;
        Ok(())
    }
}

/// Anchors of the viridis colormap at `i / 8`.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

/// Viridis color of `v ∈ [0, 1]` (clamped), channels in `[0, 1]`.
pub fn viridis(v: f64) -> [f64; 3] {
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * 8.0;
    let i = (pos.floor() as usize).min(7);
    let t = pos - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [0, 1, 2].map(|c| ((1.0 - t) * a[c] + t * b[c]) / 255.0)
}

/// Grayscale rendering of depth slice `z` (rows: x, columns: y).
pub fn gray_slice(volume: &Volume, z: usize) -> RgbImage {
    let [x, y, _] = volume.shape;
    let pixels = volume
        .slice(z)
        .into_iter()
        .map(|v| {
            let g = (v as f64).clamp(0.0, 1.0);
            [g, g, g]
        })
        .collect();
    RgbImage {
        width: y,
        height: x,
        pixels,
    }
}

/// Grid of equally sized tiles, `columns` per row, separated by `gap` pixels.
pub fn tile(images: &[RgbImage], columns: usize, gap: usize) -> Result<RgbImage> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to tile".into()))?;
    let (w, h) = (first.width, first.height);
    if images.iter().any(|i| i.width != w || i.height != h) {
        return Err(Error::InvalidArgument("tiles must share one size".into()));
    }
    let columns = columns.max(1);
    let rows = images.len().div_ceil(columns);
    let mut out = RgbImage::filled(
        columns * w + (columns - 1) * gap,
        rows * h + (rows - 1) * gap,
        [1.0; 3],
    );
    for (k, img) in images.iter().enumerate() {
        let (r0, c0) = ((k / columns) * (h + gap), (k % columns) * (w + gap));
        for r in 0..h {
            for c in 0..w {
                out.set(r0 + r, c0 + c, img.get(r, c));
            }
        }
    }
    Ok(out)
}

/// Scatter plot of `(x, y, class)` points on a white canvas with a frame;
/// classes are drawn in two colors.
pub fn scatter(points: &[(f64, f64, u8)], size: usize) -> RgbImage {
    let mut img = RgbImage::filled(size, size, [1.0; 3]);
    let margin = size / 16 + 2;
    let inner = size.saturating_sub(2 * margin).max(1);
    let frame = [0.3; 3];
    for i in margin..=margin + inner {
        img.set(margin, i, frame);
        img.set(margin + inner, i, frame);
        img.set(i, margin, frame);
        img.set(i, margin + inner, frame);
    }
    let finite: Vec<_> = points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    if finite.is_empty() {
        return img;
    }
    let range = |f: fn(&&(f64, f64, u8)) -> f64| {
        let lo = finite.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let ((x0, xw), (y0, yw)) = (range(|p| p.0), range(|p| p.1));
    let colors = [[0.12, 0.47, 0.71], [0.84, 0.15, 0.16]];
    for &&(x, y, class) in &finite {
        let col = margin + ((x - x0) / xw * inner as f64).round() as usize;
        let row = margin + inner - ((y - y0) / yw * inner as f64).round() as usize;
        for dr in 0..3 {
            for dc in 0..3 {
                img.set((row + dr).saturating_sub(1), (col + dc).saturating_sub(1), colors[(class & 1) as usize]);
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_endpoints() {
        assert_eq!(viridis(0.0), [68.0 / 255.0, 1.0 / 255.0, 84.0 / 255.0]);
        assert_eq!(viridis(1.0), [253.0 / 255.0, 231.0 / 255.0, 37.0 / 255.0]);
        assert_eq!(viridis(-3.0), viridis(0.0));
        assert_eq!(viridis(f64::NAN), viridis(0.0));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = RgbImage::filled(3, 2, [0.0; 3]);
        img.set(1, 2, [1.0, 0.5, 0.0]);
        let path = dir.path().join("a.png");
        img.write_png(&path).unwrap();
        let decoder = png::Decoder::new(std::io::BufReader::new(File::open(&path).unwrap()));
        let mut reader = decoder.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (3, 2));
        assert_eq!(&buf[15..18], &[255, 128, 0]);
    }

    #[test]
    fn tiling_places_images() {
        let a = RgbImage::filled(2, 2, [0.0; 3]);
        let b = RgbImage::filled(2, 2, [0.5; 3]);
        let t = tile(&[a, b.clone(), b], 2, 1).unwrap();
        assert_eq!((t.width, t.height), (5, 5));
        assert_eq!(t.get(0, 0), [0.0; 3]);
        assert_eq!(t.get(0, 3), [0.5; 3]);
        assert_eq!(t.get(0, 2), [1.0; 3]);
        assert_eq!(t.get(3, 0), [0.5; 3]);
    }
}
