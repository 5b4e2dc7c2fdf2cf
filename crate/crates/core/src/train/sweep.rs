use super::{evaluate, train, TrainConfig};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::losses::{AttributeMapping, LossWeights};
use crate::model::{ModelConfig, Vae};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub interpretability: f64,
    pub image_mi: f64,
}

/// Trains and evaluates one model per grid point. Every point shares the
/// seed, the data and the model initialization.
pub fn hyperparameter_sweep(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    grid: &[LossWeights],
    train_set: &Dataset,
    test_set: &Dataset,
    mapping: &AttributeMapping,
    on_row: &mut dyn FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::config("grid", "at least one grid point required"));
    }
    for w in grid {
        w.validate()?;
    }
    let use_map = model_config.toggles.use_ar.then_some(mapping);
    let mut rows = Vec::with_capacity(grid.len());
    for weights in grid {
        let config = TrainConfig {
            weights: *weights,
            ..train_config.clone()
        };
        let model = Vae::<f32>::new(model_config.clone(), config.seed)?;
        let outcome = train(model, train_set, None, mapping, &config)?;
        let report = evaluate(&outcome.last.model, test_set, use_map)?;
        let row = SweepRow {
            beta: weights.beta,
            gamma: weights.gamma,
            delta: weights.delta,
            interpretability: report.mean_interpretability(),
            image_mi: report.image_mi,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}
