//! Latent interpolation and attribute scanning.

use crate::dataio::{Dataset, Volume};
use crate::error::{Error, Result};
use crate::losses::AttributeMapping;
use crate::model::Vae;
use crate::render::{gray_slice, tile, RgbImage};
use crate::train::encode_dataset;
use ndarray::Array2;
use std::io::Write;
use std::path::Path;

/// `steps` codes on the segment from `z_a` to `z_b`, endpoints exact.
pub fn interpolate(z_a: &[f64], z_b: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    if z_a.len() != z_b.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![z_a.len()],
            actual: vec![z_b.len()],
        });
    }
    Ok((0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            z_a.iter().zip(z_b).map(|(a, b)| (1.0 - t) * a + t * b).collect()
        })
        .collect())
}

/// One row of decoded images.
#[derive(Debug, Clone)]
pub struct TraversalRow {
    pub descriptor: String,
    pub codes: Vec<Vec<f64>>,
    pub volumes: Vec<Volume>,
    /// Scanned coordinate values (scans only; empty for interpolations).
    pub step_values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TraversalGrid {
    pub rows: Vec<TraversalRow>,
}

/// Values for a scan of `[lo, hi]`. For an odd count with `lo < center < hi`
/// the middle value is `center` and each half is equally spaced; otherwise
/// the whole interval is equally spaced.
pub fn scan_values(lo: f64, hi: f64, steps: usize, center: Option<f64>) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("steps must be >= 2, got {steps}")));
    }
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!("empty scan range [{lo}, {hi}]")));
    }
    let even = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    match center {
        Some(c) if steps % 2 == 1 && lo < c && c < hi => {
            let half = steps / 2 + 1;
            let mut v = even(lo, c, half);
            v.extend(even(c, hi, half).into_iter().skip(1));
            Ok(v)
        }
        _ => Ok(even(lo, hi, steps)),
    }
}

fn decode_codes(model: &Vae<f32>, codes: &[Vec<f64>]) -> Result<Vec<Volume>> {
    let d = model.latent_dim();
    if let Some(bad) = codes.iter().find(|c| c.len() != d) {
        return Err(Error::ShapeMismatch {
            expected: vec![d],
            actual: vec![bad.len()],
        });
    }
    let z = Array2::from_shape_fn((codes.len(), d), |(i, j)| codes[i][j] as f32);
    model.decode_volumes(&z)
}

/// Decoded interpolation between two codes.
pub fn interpolate_row(model: &Vae<f32>, z_a: &[f64], z_b: &[f64], steps: usize, descriptor: &str) -> Result<TraversalRow> {
    let codes = interpolate(z_a, z_b, steps)?;
    Ok(TraversalRow {
        descriptor: descriptor.to_string(),
        volumes: decode_codes(model, &codes)?,
        codes,
        step_values: Vec::new(),
    })
}

/// Decodes copies of `z` whose mapped coordinate for `attribute` sweeps
/// `range`; every other coordinate is left untouched.
pub fn scan_attribute(
    model: &Vae<f32>,
    z: &[f64],
    attribute: &str,
    mapping: &AttributeMapping,
    range: (f64, f64),
    steps: usize,
) -> Result<TraversalRow> {
    let dim = mapping
        .dim_of(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    if dim >= z.len() {
        return Err(Error::InvalidArgument(format!("dimension {dim} outside code of length {}", z.len())));
    }
    let values = scan_values(range.0, range.1, steps, Some(z[dim]))?;
    let codes: Vec<Vec<f64>> = values
        .iter()
        .map(|&v| {
            let mut c = z.to_vec();
            c[dim] = v;
            c
        })
        .collect();
    Ok(TraversalRow {
        descriptor: attribute.to_string(),
        volumes: decode_codes(model, &codes)?,
        codes,
        step_values: values,
    })
}

/// Linear-interpolated quantile (`q ∈ [0, 1]`) of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Central `coverage` interval of the posterior means of `dim` over `dataset`.
pub fn empirical_dim_range(model: &Vae<f32>, dataset: &Dataset, dim: usize, coverage: f64) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::InvalidArgument(format!("coverage must lie in (0, 1], got {coverage}")));
    }
    if dim >= model.latent_dim() {
        return Err(Error::InvalidArgument(format!("latent dimension {dim} out of range")));
    }
    let mu = encode_dataset(model, dataset, false)?.mu;
    let col = mu.column(dim).to_vec();
    let tail = (1.0 - coverage) / 2.0;
    Ok((quantile(&col, tail), quantile(&col, 1.0 - tail)))
}

/// Tiles of a row's middle depth slice.
pub fn row_tiles(row: &TraversalRow) -> Vec<RgbImage> {
    row.volumes.iter().map(|v| gray_slice(v, v.shape[2] / 2)).collect()
}

/// Writes `<stem>.png` (one grid row per traversal row) and `<stem>.csv` with
/// columns `row,column,value,attribute`.
pub fn write_grid(grid: &TraversalGrid, extra_rows: &[Vec<RgbImage>], dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let columns = grid.rows.iter().map(|r| r.volumes.len()).max().unwrap_or(0);
    let mut tiles = Vec::new();
    for row in grid.rows.iter().map(row_tiles).chain(extra_rows.iter().cloned()) {
        let blank = row.first().map(|t| RgbImage::filled(t.width, t.height, [1.0; 3]));
        let n = row.len();
        tiles.extend(row);
        if let Some(b) = blank {
            tiles.extend(std::iter::repeat_n(b, columns - n));
        }
    }
    tile(&tiles, columns, 2)?.write_png(&dir.join(format!("{stem}.png")))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?);
    writeln!(w, "row,column,value,attribute")?;
    for (r, row) in grid.rows.iter().enumerate() {
        for c in 0..row.volumes.len() {
            let value = row.step_values.get(c).map_or(String::new(), |v| v.to_string());
            writeln!(w, "{r},{c},{value},{}", row.descriptor)?;
        }
    }
    Ok(())
}
