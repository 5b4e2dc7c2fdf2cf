use super::{target_matrix, to_f64};
use crate::dataio::{Dataset, Volume};
use crate::error::Result;
use crate::losses::{total_loss, AttributeMapping, LossBreakdown, LossInputs, LossWeights, Objective};
use crate::metrics::{self, MetricsReport, DEFAULT_BINS, DEFAULT_IMAGE_BINS};
use crate::model::Vae;
use ndarray::{concatenate, Array1, Array2, Axis};

/// Samples per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 64;

/// Evaluation-mode outputs for a whole dataset, in sample order.
#[derive(Debug, Clone)]
pub struct EncodedSet {
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
    /// Class-1 probability from the posterior mean.
    pub y_c: Array1<f64>,
    /// Reconstructions of the posterior means, `(n, V)`, when requested.
    pub x_hat: Option<Array2<f64>>,
}

pub fn encode_dataset(model: &Vae<f32>, dataset: &Dataset, reconstruct: bool) -> Result<EncodedSet> {
    let (mut mus, mut lvs, mut ys, mut xs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for chunk in dataset.samples().chunks(EVAL_CHUNK) {
        let volumes: Vec<&Volume> = chunk.iter().map(|s| &s.volume).collect();
        let (mu, lv) = model.encode_volumes(&volumes)?;
        ys.push(model.classify(&mu)?.mapv(|v| v as f64));
        if reconstruct {
            xs.push(to_f64(&model.decode(&mu)?));
        }
        mus.push(to_f64(&mu));
        lvs.push(to_f64(&lv));
    }
    let stack2 = |parts: &[Array2<f64>], cols: usize| {
        if parts.is_empty() {
            Array2::zeros((0, cols))
        } else {
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            concatenate(Axis(0), &views).expect("equal widths")
        }
    };
    let d = model.latent_dim();
    Ok(EncodedSet {
        mu: stack2(&mus, d),
        logvar: stack2(&lvs, d),
        y_c: ys.iter().flat_map(|y| y.iter().copied()).collect(),
        x_hat: reconstruct.then(|| stack2(&xs, model.voxels())),
    })
}

/// Deterministic objective over a whole dataset: evaluation mode, `z = mu`,
/// the regularizer taken over all sample pairs.
pub fn evaluation_loss(
    model: &Vae<f32>,
    dataset: &Dataset,
    mapping: &AttributeMapping,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let enc = encode_dataset(model, dataset, true)?;
    let volumes: Vec<&Volume> = dataset.samples().iter().map(|s| &s.volume).collect();
    let x = target_matrix(&volumes);
    let pairs = mapping.resolve(dataset.attribute_names())?;
    let attrs = dataset.attribute_matrix();
    let labels = dataset.labels();
    let x_hat = enc.x_hat.expect("requested");
    let inputs = LossInputs {
        x: &x,
        x_hat: &x_hat,
        mu: &enc.mu,
        logvar: &enc.logvar,
        z: &enc.mu,
        y_c: &enc.y_c,
        attrs: &attrs,
        labels: &labels,
    };
    let objective = Objective {
        weights: *weights,
        toggles: model.config().toggles,
        recon_kind: model.config().recon_loss_kind,
        pairs: &pairs,
    };
    total_loss(&inputs, &objective)
}

/// Full metric suite on `dataset` (posterior means as the latent bundle).
///
/// With `mapping`, interpretability is read at the mapped dimensions;
/// without it, at each attribute's maximum-MI dimension.
pub fn evaluate(model: &Vae<f32>, dataset: &Dataset, mapping: Option<&AttributeMapping>) -> Result<MetricsReport> {
    let enc = encode_dataset(model, dataset, true)?;
    let z = &enc.mu;
    let a = dataset.attribute_matrix();
    let names = dataset.attribute_names();
    let volumes: Vec<&Volume> = dataset.samples().iter().map(|s| &s.volume).collect();
    let x = target_matrix(&volumes);
    let x_hat = enc.x_hat.as_ref().expect("requested");

    let image_mi = x
        .rows()
        .into_iter()
        .zip(x_hat.rows())
        .map(|(r, h)| metrics::image_mi(r.as_slice().unwrap(), &h.to_vec(), DEFAULT_IMAGE_BINS))
        .sum::<Result<f64>>()?
        / x.nrows().max(1) as f64;
    let classification = metrics::classification_scores(enc.y_c.as_slice().unwrap(), &dataset.labels())?;
    let dims = metrics::interpretability_dims(z, &a, names, mapping)?;

    Ok(MetricsReport {
        modularity: metrics::modularity(&metrics::mi_matrix(z, &a, DEFAULT_BINS)?)?,
        mig: metrics::mig(z, &a, DEFAULT_BINS)?,
        sap: metrics::sap(z, &a)?,
        scc: metrics::scc(z, &a)?,
        interpretability: metrics::interpretability(z, &a, names, mapping)?,
        mmd: metrics::mmd(&x, x_hat)?,
        image_mi,
        accuracy: classification.accuracy,
        auc: classification.auc,
        interpretability_dims: names.iter().cloned().zip(dims).collect(),
        scc_mapped: match mapping {
            Some(m) => metrics::scc_mapped(z, &a, names, m)?,
            None => Default::default(),
        },
    })
}
