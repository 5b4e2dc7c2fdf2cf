//! Disentanglement, interpretability, fidelity and classification metrics.
//!
//! All functions are pure. Latent matrices are `n × D` (rows are samples,
//! usually posterior means) and attribute matrices are `n × K`.

mod classification;
mod fidelity;
mod info;
mod predict;

pub use classification::{classification_scores, ClassificationScores};
pub use fidelity::{image_mi, median_pairwise_distance, mmd, DEFAULT_IMAGE_BINS};
pub use info::{
    binned_entropy, discretize, entropy, mi_matrix, mi_matrix_raw, mig, mig_per_attribute,
    modularity, mutual_information, DEFAULT_BINS, MI_SIGNIFICANCE,
};
pub use predict::{
    interpretability, interpretability_dims, r_squared, ranks, sap, scc, scc_mapped, spearman,
};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Scores from one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub modularity: f64,
    pub mig: f64,
    pub sap: f64,
    pub scc: f64,
    /// Per attribute; `null` for attributes constant on the evaluation set.
    pub interpretability: IndexMap<String, Option<f64>>,
    pub mmd: f64,
    pub image_mi: f64,
    pub accuracy: f64,
    pub auc: Option<f64>,
    /// Latent dimension used for each attribute's interpretability score.
    pub interpretability_dims: IndexMap<String, usize>,
    /// |Spearman| at each mapped dimension (empty without a mapping).
    pub scc_mapped: IndexMap<String, f64>,
}

impl MetricsReport {
    pub fn mean_interpretability(&self) -> f64 {
        let v: Vec<f64> = self.interpretability.values().flatten().copied().collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}
