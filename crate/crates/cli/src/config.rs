//! Run configuration: one JSON document with dotted-path overrides.

use latentreg_core::dataio::{load_dataset, preprocess, AnnulusSpec, Dataset};
use latentreg_core::losses::{AttributeMapping, LossWeights};
use latentreg_core::model::{ModelConfig, Variant};
use latentreg_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Problems in the configuration itself (exit code 2).
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config")]
    Parse(#[from] serde_json::Error),
    #[error("override `{0}` must look like key=value")]
    Override(String),
    #[error("override `{key}`: `{segment}` is not an object")]
    NotAnObject { key: String, segment: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Cohort produced by `synth`.
    pub synth: AnnulusSpec,
    /// Dataset directory (volumes plus `attributes.csv`); defaults to
    /// `<output_dir>/data`.
    pub dir: Option<PathBuf>,
    /// Crop/scale/pad every volume to the model's image shape on load.
    pub preprocess: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            synth: AnnulusSpec::default(),
            dir: None,
            preprocess: false,
        }
    }
}

/// Grid axes for `sweep`; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            beta: vec![2.0],
            gamma: vec![0.0, 10.0, 100.0, 200.0],
            delta: vec![10.0],
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<LossWeights> {
        let mut out = Vec::new();
        for &beta in &self.beta {
            for &gamma in &self.gamma {
                for &delta in &self.delta {
                    out.push(LossWeights { beta, gamma, delta });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Sets `model.toggles` when present.
    pub variant: Option<Variant>,
    /// Attribute → latent dimension; defaults to the dataset's attribute
    /// columns in order, starting at dimension 0.
    pub mapping: Option<AttributeMapping>,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            variant: None,
            mapping: None,
            sweep: SweepConfig::default(),
        }
    }
}

/// Parses `value` as JSON, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `a.b.c=value` to a JSON tree.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let mut node = tree;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node.as_object_mut().ok_or_else(|| ConfigError::NotAnObject {
            key: key.to_string(),
            segment: part.to_string(),
        })?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), parse_value(raw));
            return Ok(());
        }
        node = obj.entry(part).or_insert(Value::Null);
    }
    Ok(())
}

/// Merges `patch` into `base`, objects recursively.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    /// Defaults, then the file, then `--set` overrides, then validation.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut tree = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            let patch: Value = serde_json::from_str(&text)?;
            if !patch.is_object() {
                return Err(ConfigError::Invalid("config file must hold a JSON object".into()));
            }
            merge(&mut tree, patch);
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut config: RunConfig = serde_json::from_value(tree)?;
        if let Some(v) = config.variant {
            config.model.toggles = v.toggles();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: latentreg_core::Error| ConfigError::Invalid(e.to_string());
        self.model.validate().map_err(wrap)?;
        self.train.validate(self.model.toggles.use_ar).map_err(wrap)?;
        self.data.synth.validate().map_err(wrap)?;
        if let Some(m) = &self.mapping {
            m.validate(self.model.latent_dim).map_err(wrap)?;
        }
        for w in self.sweep.grid() {
            w.validate().map_err(wrap)?;
        }
        if self.sweep.grid().is_empty() {
            return Err(ConfigError::Invalid("sweep grid is empty".into()));
        }
        Ok(())
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data.dir.clone().unwrap_or_else(|| self.output_dir.join("data"))
    }

    /// Loads the dataset and brings it to the model's image shape.
    pub fn load_data(&self, dir: &Path) -> anyhow::Result<Dataset> {
        let dataset = load_dataset(dir, &dir.join("attributes.csv"))?;
        let target = self.model.image_shape;
        if self.data.preprocess {
            Ok(dataset.map_volumes(|v| preprocess(v, target))?)
        } else if dataset.shape() != target {
            Err(ConfigError::Invalid(format!(
                "dataset shape {:?} differs from model.image_shape {:?}; set data.preprocess=true to resample",
                dataset.shape(),
                target
            ))
            .into())
        } else {
            Ok(dataset)
        }
    }

    /// The configured mapping, or the dataset's columns in order.
    pub fn mapping_for(&self, dataset: &Dataset) -> Result<AttributeMapping, ConfigError> {
        let mapping = match &self.mapping {
            Some(m) => m.clone(),
            None => AttributeMapping::sequential(dataset.attribute_names()),
        };
        let wrap = |e: latentreg_core::Error| ConfigError::Invalid(e.to_string());
        mapping.validate(self.model.latent_dim).map_err(wrap)?;
        mapping.resolve(dataset.attribute_names()).map_err(wrap)?;
        Ok(mapping)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let c = RunConfig::resolve(None, &["train.weights.gamma=50".into(), "model.latent_dim=8".into(), "model.embedding_dim=16".into()]).unwrap();
        assert_eq!(c.train.weights.gamma, 50.0);
        assert_eq!(c.model.latent_dim, 8);
    }

    #[test]
    fn variant_sets_toggles() {
        let c = RunConfig::resolve(None, &["variant=vae".into()]).unwrap();
        assert_eq!(c.model.toggles, Variant::Vae.toggles());
        assert_eq!(c.train.weights.effective_beta(c.model.toggles), 1.0);
        let c = RunConfig::resolve(None, &["variant=attri_vae".into()]).unwrap();
        assert!(c.model.toggles.use_beta && c.model.toggles.use_mlp && c.model.toggles.use_ar);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::resolve(None, &["train.learning_rate=1".into()]), Err(ConfigError::Parse(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"model": {"latent_dims": 3}}"#).unwrap();
        assert!(matches!(RunConfig::resolve(Some(&path), &[]), Err(ConfigError::Parse(_))));
        std::fs::write(&path, r#"{"model": {"latent_dim": 3, "embedding_dim": 9}}"#).unwrap();
        let c = RunConfig::resolve(Some(&path), &[]).unwrap();
        assert_eq!((c.model.latent_dim, c.model.embedding_dim), (3, 9));
        assert_eq!(c.model.conv_channels, ModelConfig::default().conv_channels);
    }

    #[test]
    fn invalid_mapping_dimension_is_a_config_error() {
        let err = RunConfig::resolve(None, &[r#"mapping=[["cavity_area", 64]]"#.into()]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(matches!(RunConfig::resolve(None, &["nokey".into()]), Err(ConfigError::Override(_))));
    }

    #[test]
    fn sweep_grid_is_a_product() {
        let s = SweepConfig {
            beta: vec![1.0, 2.0],
            gamma: vec![0.0, 10.0, 100.0],
            delta: vec![10.0],
        };
        assert_eq!(s.grid().len(), 6);
    }
}
