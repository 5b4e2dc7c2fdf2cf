//! Raw little-endian float32 volumes with `.shape` sidecars, and the CSV
//! attribute table `id,<attr...>,label`.

use super::{Dataset, Sample, Volume};
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

pub fn write_volume(dir: &Path, id: &str, volume: &Volume) -> Result<()> {
    let mut bytes = Vec::with_capacity(volume.len() * 4);
    for v in &volume.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{id}.f32")), bytes)?;
    let [x, y, z] = volume.shape;
    fs::write(dir.join(format!("{id}.shape")), format!("{x} {y} {z}\n"))?;
    Ok(())
}

pub fn read_volume(dir: &Path, id: &str) -> Result<Volume> {
    let data_path = dir.join(format!("{id}.f32"));
    let shape_path = dir.join(format!("{id}.shape"));
    if !data_path.is_file() || !shape_path.is_file() {
        return Err(Error::MissingVolume(id.to_string()));
    }
    let text = fs::read_to_string(&shape_path)?;
    let dims: Vec<usize> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Malformed {
            path: shape_path.display().to_string(),
            reason: format!("{e}"),
        })?;
    let shape: [usize; 3] = match dims.as_slice() {
        [x, y, z] => [*x, *y, *z],
        [x, y] => [*x, *y, 1],
        _ => {
            return Err(Error::Malformed {
                path: shape_path.display().to_string(),
                reason: "expected \"X Y Z\"".into(),
            })
        }
    };
    let bytes = fs::read(&data_path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Malformed {
            path: data_path.display().to_string(),
            reason: "length is not a multiple of 4".into(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Volume::new(shape, data)
}

/// Writes every volume plus `attributes.csv` into `dir` (created if absent).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("attributes.csv"))?;
    let mut header = vec!["id".to_string()];
    header.extend(dataset.attribute_names().iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    for s in dataset.samples() {
        write_volume(dir, &s.id, &s.volume)?;
        let mut row = vec![s.id.clone()];
        row.extend(s.attributes.iter().map(|a| a.to_string()));
        row.push(s.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a cohort; attributes keep the table's column order. Volumes are
/// returned as stored (no normalization).
pub fn load_dataset(volume_dir: &Path, attribute_table: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(attribute_table)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 2 || cols[0] != "id" || cols[cols.len() - 1] != "label" {
        return Err(Error::Malformed {
            path: attribute_table.display().to_string(),
            reason: "header must be `id,<attr...>,label`".into(),
        });
    }
    let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut samples = Vec::new();
    let mut shape = None;
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row_idx + 1;
        let id = rec.get(0).unwrap_or_default().to_string();
        let mut attributes = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let cell = rec.get(j + 1).unwrap_or_default().trim();
            let value: f64 = cell.parse().map_err(|_| Error::BadCell {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            attributes.push(value);
        }
        let cell = rec.get(names.len() + 1).unwrap_or_default().trim();
        let label = match cell.parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => {
                return Err(Error::BadCell {
                    row,
                    column: "label".into(),
                    value: cell.to_string(),
                })
            }
        };
        let volume = read_volume(volume_dir, &id)?;
        shape.get_or_insert(volume.shape);
        samples.push(Sample {
            id,
            volume,
            attributes,
            label,
        });
    }
    Dataset::new(samples, names, shape.unwrap_or([0, 0, 0]))
}
