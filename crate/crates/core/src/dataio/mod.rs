//! Datasets of image volumes with per-sample attributes and binary labels.
//!
//! Contains the synthetic annulus generator, raw-float32/CSV persistence,
//! intensity preprocessing, minority oversampling and recursive feature
//! elimination for attribute selection.

mod balance;
mod io;
mod preprocess;
mod rfe;
mod synth;

pub use balance::oversample_minority;
pub use io::{load_dataset, read_volume, save_dataset, write_volume};
pub use preprocess::preprocess;
pub use rfe::{rfe_select, RfeOptions};
pub use synth::{generate_annulus_dataset, AnnulusSpec, Range, CAVITY_INTENSITY, SCAR_INTENSITY};

use crate::error::{Error, Result};
use crate::nn::Spatial;
use ndarray::Array2;
use sha2::{Digest, Sha256};

/// Dense intensity grid, C-ordered over `(X, Y, Z)`. 2D images have `Z = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub shape: Spatial,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(shape: Spatial, data: Vec<f32>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if data.len() != expected || expected == 0 {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Spatial) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.shape[1] + y) * self.shape[2] + z
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    /// One `(X, Y)` slice at depth `z`, row-major.
    pub fn slice(&self, z: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.shape[0] * self.shape[1]);
        for x in 0..self.shape[0] {
            for y in 0..self.shape[1] {
                out.push(self.get(x, y, z));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub volume: Volume,
    /// Values aligned with [`Dataset::attribute_names`].
    pub attributes: Vec<f64>,
    pub label: u8,
}

/// Ordered cohort of samples sharing a volume shape and attribute set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    attribute_names: Vec<String>,
    shape: Spatial,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, attribute_names: Vec<String>, shape: Spatial) -> Result<Self> {
        for s in &samples {
            if s.volume.shape != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_vec(),
                    actual: s.volume.shape.to_vec(),
                });
            }
            if s.attributes.len() != attribute_names.len() {
                return Err(Error::InvalidArgument(format!(
                    "sample `{}` has {} attributes, expected {}",
                    s.id,
                    s.attributes.len(),
                    attribute_names.len()
                )));
            }
            if s.label > 1 {
                return Err(Error::InvalidArgument(format!(
                    "sample `{}` has label {}; labels are binary",
                    s.id, s.label
                )));
            }
        }
        Ok(Self {
            samples,
            attribute_names,
            shape,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn shape(&self) -> Spatial {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attribute_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// `n × K` matrix of attribute values.
    pub fn attribute_matrix(&self) -> Array2<f64> {
        let k = self.attribute_names.len();
        Array2::from_shape_fn((self.len(), k), |(i, j)| self.samples[i].attributes[j])
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// `(count of label 0, count of label 1)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.samples.iter().filter(|s| s.label == 1).count();
        (self.len() - ones, ones)
    }

    /// New dataset holding the given samples (in order, repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            attribute_names: self.attribute_names.clone(),
            shape: self.shape,
        }
    }

    pub fn map_volumes(&self, mut f: impl FnMut(&Volume) -> Volume) -> Result<Self> {
        let samples: Vec<Sample> = self
            .samples
            .iter()
            .map(|s| Sample {
                volume: f(&s.volume),
                ..s.clone()
            })
            .collect();
        let shape = samples.first().map_or(self.shape, |s| s.volume.shape);
        Self::new(samples, self.attribute_names.clone(), shape)
    }

    /// SHA-256 over ids, attributes, labels and volume bytes, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.attribute_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for d in self.shape {
            h.update((d as u64).to_le_bytes());
        }
        for s in &self.samples {
            h.update(s.id.as_bytes());
            h.update([0u8, s.label]);
            for a in &s.attributes {
                h.update(a.to_le_bytes());
            }
            for v in &s.volume.data {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
