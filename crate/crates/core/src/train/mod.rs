//! Optimization loop, evaluation and hyperparameter sweeps.

mod adam;
mod checkpoint;
mod evaluate;
mod split;
mod sweep;

pub use adam::{Adam, AdamParams};
pub use checkpoint::{Checkpoint, Manifest, MANIFEST_FILE, WEIGHTS_FILE};
pub use evaluate::{encode_dataset, evaluate, evaluation_loss, EncodedSet, EVAL_CHUNK};
pub use split::split;
pub use sweep::{hyperparameter_sweep, SweepRow};

use crate::dataio::{oversample_minority, Dataset, Volume};
use crate::error::{Error, Result};
use crate::losses::{total_loss_and_grads, AttributeMapping, LossBreakdown, LossInputs, LossWeights, Objective};
use crate::model::{OutputGrads, Vae};
use crate::nn::Scalar;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub split_fraction: f64,
    pub oversample: bool,
    /// Stop when the validation loss has not improved for `patience` epochs.
    pub early_stop: bool,
    pub patience: usize,
    /// Validation snapshot cadence in epochs (0 disables snapshots).
    pub validation_every: usize,
    pub adam: AdamParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            lr: 1e-4,
            batch_size: 16,
            epochs: 300,
            seed: 0,
            split_fraction: 0.7,
            oversample: true,
            early_stop: false,
            patience: 50,
            validation_every: 25,
            adam: AdamParams::default(),
        }
    }
}

impl TrainConfig {
    /// `use_ar` comes from the model's toggles.
    pub fn validate(&self, use_ar: bool) -> Result<()> {
        self.weights.validate()?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", format!("must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if use_ar && self.batch_size < 2 {
            return Err(Error::config(
                "batch_size",
                "attribute regularization compares pairs; batch_size must be >= 2",
            ));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::config("split_fraction", "must lie in (0, 1)"));
        }
        if self.early_stop && self.patience == 0 {
            return Err(Error::config("patience", "must be positive when early_stop is on"));
        }
        let AdamParams { beta1, beta2, eps } = self.adam;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(Error::config("adam", "need 0 <= beta1, beta2 < 1 and eps > 0"));
        }
        Ok(())
    }
}

/// Metrics recorded on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSnapshot {
    pub loss: f64,
    pub interpretability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    /// 1-based.
    pub epoch: usize,
    /// Mean over the epoch's mini-batches.
    pub losses: LossBreakdown,
    pub validation: Option<ValidationSnapshot>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub last: Checkpoint,
    /// Lowest validation loss seen, when a validation set was given.
    pub best: Option<Checkpoint>,
    pub log: Vec<TrainLogRow>,
}

/// Training log as CSV with header `epoch,recon,kl,mlp,ar,total`.
pub fn write_log_csv(log: &[TrainLogRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,recon,kl,mlp,ar,total")?;
    for r in log {
        let l = &r.losses;
        writeln!(w, "{},{},{},{},{},{}", r.epoch, l.recon, l.kl, l.mlp, l.ar, l.total)?;
    }
    Ok(())
}

/// Validation snapshots as CSV with header `epoch,loss,interpretability`.
pub fn write_validation_csv(log: &[TrainLogRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,loss,interpretability")?;
    for r in log {
        if let Some(v) = r.validation {
            writeln!(w, "{},{},{}", r.epoch, v.loss, v.interpretability)?;
        }
    }
    Ok(())
}

/// Rows of `volumes` as a `(B, V)` target matrix.
pub(crate) fn target_matrix(volumes: &[&Volume]) -> Array2<f64> {
    let v = volumes.first().map_or(0, |x| x.len());
    Array2::from_shape_fn((volumes.len(), v), |(i, j)| volumes[i].data[j] as f64)
}

pub(crate) fn to_f64<S: Scalar>(a: &Array2<S>) -> Array2<f64> {
    a.mapv(|v| v.as_f64())
}

fn to_s<S: Scalar>(a: &Array2<f64>) -> Array2<S> {
    a.mapv(S::from_f64_lossy)
}

/// One optimizer step on a batch; returns the batch's loss breakdown.
fn train_step(
    model: &mut Vae<f32>,
    adam: &mut Adam,
    batch: &[&crate::dataio::Sample],
    objective: &Objective<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<LossBreakdown> {
    let volumes: Vec<&Volume> = batch.iter().map(|s| &s.volume).collect();
    let x = model.input_batch(&volumes)?;
    let d = model.latent_dim();
    let noise = Array2::<f32>::from_shape_simple_fn((batch.len(), d), || rng.sample(StandardNormal));
    let tape = model.forward_tape(&x, &noise)?;
    let targets = target_matrix(&volumes);
    let k = batch.first().map_or(0, |s| s.attributes.len());
    let attrs = Array2::from_shape_fn((batch.len(), k), |(i, j)| batch[i].attributes[j]);
    let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
    let (x_hat, mu, logvar, z) = (to_f64(&tape.x_hat), to_f64(&tape.mu), to_f64(&tape.logvar), to_f64(&tape.z));
    let y_c: Array1<f64> = tape.y_c.mapv(|v| v as f64);
    let inputs = LossInputs {
        x: &targets,
        x_hat: &x_hat,
        mu: &mu,
        logvar: &logvar,
        z: &z,
        y_c: &y_c,
        attrs: &attrs,
        labels: &labels,
    };
    let (breakdown, g) = total_loss_and_grads(&inputs, objective)?;
    if !breakdown.total.is_finite() {
        return Ok(breakdown);
    }
    model.zero_grad();
    model.backward(
        &tape,
        &OutputGrads {
            d_mu: to_s(&g.d_mu),
            d_logvar: to_s(&g.d_logvar),
            d_z: to_s(&g.d_z),
            d_recon_logits: to_s(&g.d_recon_logits),
            d_class_logits: g.d_class_logits.mapv(|v| v as f32),
        },
    );
    adam.step(model);
    model.commit_running_stats(&tape);
    Ok(breakdown)
}

/// Trains `model` with Adam on mini-batches of `train_set`.
///
/// The training split is oversampled when configured; `validation` is never
/// modified. Deterministic for a fixed seed.
pub fn train(
    model: Vae<f32>,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    mapping: &AttributeMapping,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, train_set, validation, mapping, config, &mut |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    mut model: Vae<f32>,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    mapping: &AttributeMapping,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&TrainLogRow),
) -> Result<TrainOutcome> {
    let toggles = model.config().toggles;
    config.validate(toggles.use_ar)?;
    mapping.validate(model.latent_dim())?;
    let pairs = mapping.resolve(train_set.attribute_names())?;
    if train_set.shape() != model.config().image_shape {
        return Err(Error::ShapeMismatch {
            expected: model.config().image_shape.to_vec(),
            actual: train_set.shape().to_vec(),
        });
    }
    let data = if config.oversample {
        oversample_minority(train_set, config.seed)?
    } else {
        train_set.clone()
    };
    let objective = Objective {
        weights: config.weights,
        toggles,
        recon_kind: model.config().recon_loss_kind,
        pairs: &pairs,
    };
    let model_config = model.config().clone();
    let dataset_hash = train_set.content_hash();
    let manifest = |epoch| Manifest {
        model: model_config.clone(),
        train: config.clone(),
        mapping: mapping.clone(),
        attribute_names: train_set.attribute_names().to_vec(),
        seed: config.seed,
        epoch,
        dataset_hash: dataset_hash.clone(),
        value_count: 0,
    };

    let mut adam = Adam::new(&mut model, config.lr, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let min_batch = if toggles.use_ar { 2 } else { 1 };
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < min_batch {
                continue;
            }
            let batch: Vec<_> = chunk.iter().map(|&i| &data.samples()[i]).collect();
            let l = train_step(&mut model, &mut adam, &batch, &objective, &mut rng)?;
            let values = [l.recon, l.kl, l.mlp, l.ar, l.total];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sum.recon += l.recon;
            sum.kl += l.kl;
            sum.mlp += l.mlp;
            sum.ar += l.ar;
            sum.total += l.total;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        let losses = LossBreakdown {
            recon: sum.recon / n,
            kl: sum.kl / n,
            mlp: sum.mlp / n,
            ar: sum.ar / n,
            total: sum.total / n,
        };

        let snapshot_due = config.validation_every > 0
            && (epoch % config.validation_every == 0 || epoch == config.epochs);
        let mut snapshot = None;
        if let Some(val) = validation.filter(|_| snapshot_due || config.early_stop) {
            let loss = evaluation_loss(&model, val, mapping, &config.weights)?.total;
            let interpretability = if snapshot_due {
                let map = toggles.use_ar.then_some(mapping);
                let enc = encode_dataset(&model, val, false)?;
                crate::metrics::interpretability(&enc.mu, &val.attribute_matrix(), val.attribute_names(), map)?
                    .values()
                    .flatten()
                    .sum::<f64>()
                    / val.attribute_names().len().max(1) as f64
            } else {
                f64::NAN
            };
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, Checkpoint::new(model.clone(), manifest(epoch))));
                since_best = 0;
            } else {
                since_best += 1;
            }
            if snapshot_due {
                snapshot = Some(ValidationSnapshot { loss, interpretability });
            }
        }
        let row = TrainLogRow {
            epoch,
            losses,
            validation: snapshot,
        };
        on_epoch(&row);
        log.push(row);
        if config.early_stop && validation.is_some() && since_best >= config.patience {
            break;
        }
    }
    let epochs_done = log.len();
    Ok(TrainOutcome {
        last: Checkpoint::new(model.clone(), manifest(epochs_done)),
        best: best.map(|(_, c)| c),
        log,
    })
}
