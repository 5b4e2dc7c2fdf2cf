//! Checkpoints: `weights.bin` (little-endian f32 parameters followed by
//! batch-norm running statistics, in visiting order) and `manifest.json`.

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::losses::AttributeMapping;
use crate::model::{ModelConfig, Vae};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const WEIGHTS_FILE: &str = "weights.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub mapping: AttributeMapping,
    /// Attribute column order of the training data.
    pub attribute_names: Vec<String>,
    pub seed: u64,
    /// Number of completed training epochs.
    pub epoch: usize,
    /// SHA-256 of the training dataset content.
    pub dataset_hash: String,
    /// Total scalar count in `weights.bin`.
    pub value_count: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Vae<f32>,
    pub manifest: Manifest,
}

fn flatten(model: &Vae<f32>) -> Vec<f32> {
    let mut m = model.clone();
    let mut out = Vec::new();
    m.visit_params(&mut |_, w, _| out.extend_from_slice(w));
    m.visit_buffers(&mut |_, b| out.extend_from_slice(b));
    out
}

impl Checkpoint {
    pub fn new(model: Vae<f32>, mut manifest: Manifest) -> Self {
        manifest.value_count = flatten(&model).len();
        Self { model, manifest }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let values = flatten(&self.model);
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(dir.join(WEIGHTS_FILE), bytes)?;
        let mut manifest = self.manifest.clone();
        manifest.value_count = values.len();
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        let weights_path = dir.join(WEIGHTS_FILE);
        let bytes = fs::read(&weights_path)?;
        let malformed = |reason: String| Error::Malformed {
            path: weights_path.display().to_string(),
            reason,
        };
        if bytes.len() != manifest.value_count * 4 {
            return Err(malformed(format!(
                "expected {} values, found {} bytes",
                manifest.value_count,
                bytes.len()
            )));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut model = Vae::<f32>::new(manifest.model.clone(), 0)?;
        let mut expected = 0;
        model.visit_params(&mut |_, w, _| expected += w.len());
        model.visit_buffers(&mut |_, b| expected += b.len());
        if expected != values.len() {
            return Err(malformed(format!(
                "architecture needs {expected} values, file holds {}",
                values.len()
            )));
        }
        let mut offset = 0;
        model.visit_params(&mut |_, w, _| {
            w.copy_from_slice(&values[offset..offset + w.len()]);
            offset += w.len();
        });
        model.visit_buffers(&mut |_, b| {
            b.copy_from_slice(&values[offset..offset + b.len()]);
            offset += b.len();
        });
        Ok(Self { model, manifest })
    }
}
