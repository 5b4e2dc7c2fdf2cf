//! Loss terms (reconstruction, KL, attribute regularization, classification)
//! and their weighted sum, each with an analytic gradient.
//!
//! Everything here works in `f64` on batch-major matrices. Recon/KL/MLP are
//! averaged over the batch; the attribute term is a mean over all `n²` pairs,
//! summed over regularized attributes.

use crate::error::{Error, Result};
use crate::model::{ReconLossKind, Toggles};
use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 2.0,
            gamma: 200.0,
            delta: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::config("delta", format!("must be finite and > 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// KL weight actually applied under `toggles`.
    pub fn effective_beta(&self, toggles: Toggles) -> f64 {
        if toggles.use_beta {
            self.beta
        } else {
            1.0
        }
    }
}

/// Ordered `(attribute name, latent dimension)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct AttributeMapping {
    entries: Vec<(String, usize)>,
}

impl AttributeMapping {
    /// Rejects duplicate names or duplicate dimensions.
    pub fn new(entries: Vec<(String, usize)>) -> Result<Self> {
        let mut names = HashSet::new();
        let mut dims = HashSet::new();
        for (name, dim) in &entries {
            if !names.insert(name.as_str()) {
                return Err(Error::config("mapping", format!("attribute `{name}` mapped twice")));
            }
            if !dims.insert(*dim) {
                return Err(Error::config("mapping", format!("dimension {dim} used twice")));
            }
        }
        Ok(Self { entries })
    }

    /// The k-th attribute on dimension k.
    pub fn sequential<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            entries: names.iter().enumerate().map(|(i, n)| (n.as_ref().to_string(), i)).collect(),
        }
    }

    pub fn entries(&self) -> &[(String, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|(n, _)| n == name).map(|&(_, d)| d)
    }

    /// Checks every dimension against the latent size.
    pub fn validate(&self, latent_dim: usize) -> Result<()> {
        if self.entries.len() > latent_dim {
            return Err(Error::config(
                "mapping",
                format!("{} attributes exceed latent dimension {latent_dim}", self.entries.len()),
            ));
        }
        if let Some((name, d)) = self.entries.iter().find(|(_, d)| *d >= latent_dim) {
            return Err(Error::config(
                "mapping",
                format!("attribute `{name}` mapped to dimension {d}, but D = {latent_dim}"),
            ));
        }
        Ok(())
    }

    /// `(attribute column, latent dimension)` pairs against a column list.
    pub fn resolve<S: AsRef<str>>(&self, columns: &[S]) -> Result<Vec<(usize, usize)>> {
        self.entries
            .iter()
            .map(|(name, d)| {
                columns
                    .iter()
                    .position(|c| c.as_ref() == name)
                    .map(|k| (k, *d))
                    .ok_or_else(|| Error::UnknownAttribute(name.clone()))
            })
            .collect()
    }
}

/// Per-term values of one loss evaluation. Disabled terms are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl: f64,
    pub mlp: f64,
    pub ar: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `recon + beta·kl + mlp + gamma·ar` with the toggles' weights.
    pub fn combine(recon: f64, kl: f64, mlp: f64, ar: f64, weights: &LossWeights, toggles: Toggles) -> Self {
        let mlp = if toggles.use_mlp { mlp } else { 0.0 };
        let ar = if toggles.use_ar { ar } else { 0.0 };
        let total = recon + weights.effective_beta(toggles) * kl + mlp + weights.gamma * ar;
        Self {
            recon,
            kl,
            mlp,
            ar,
            total,
        }
    }

    /// Residual of the total identity; 0 up to rounding for a consistent row.
    pub fn identity_residual(&self, weights: &LossWeights, toggles: Toggles) -> f64 {
        let expected = self.recon
            + weights.effective_beta(toggles) * self.kl
            + if toggles.use_mlp { self.mlp } else { 0.0 }
            + if toggles.use_ar { weights.gamma * self.ar } else { 0.0 };
        (self.total - expected).abs()
    }
}

fn check_same(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: vec![a.0, a.1],
            actual: vec![b.0, b.1],
        });
    }
    Ok(())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn bce(p: f64, t: f64) -> f64 {
    let p = clamp_prob(p);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Reconstruction loss of `(B, V)` probabilities against targets, summed
/// over voxels and averaged over the batch.
pub fn recon_loss(x_hat: &Array2<f64>, x: &Array2<f64>, kind: ReconLossKind) -> Result<f64> {
    check_same(x.dim(), x_hat.dim())?;
    let b = x.nrows().max(1) as f64;
    let s: f64 = match kind {
        ReconLossKind::Bce => Zip::from(x_hat).and(x).fold(0.0, |acc, &p, &t| acc + bce(p, t)),
        ReconLossKind::Mse => Zip::from(x_hat).and(x).fold(0.0, |acc, &p, &t| acc + (p - t).powi(2)),
    };
    Ok(s / b)
}

/// Gradient of [`recon_loss`] with respect to the decoder's pre-sigmoid
/// outputs, given `x_hat = sigmoid(logits)`.
pub fn recon_logit_grad(x_hat: &Array2<f64>, x: &Array2<f64>, kind: ReconLossKind) -> Result<Array2<f64>> {
    check_same(x.dim(), x_hat.dim())?;
    let b = x.nrows().max(1) as f64;
    let mut g = x_hat - x;
    if kind == ReconLossKind::Mse {
        Zip::from(&mut g).and(x_hat).for_each(|g, &p| *g *= 2.0 * p * (1.0 - p));
    }
    g /= b;
    Ok(g)
}

/// `0.5 · Σ_d (mu² + exp(logvar) − 1 − logvar)`, averaged over rows.
pub fn kl_loss(mu: &Array2<f64>, logvar: &Array2<f64>) -> Result<f64> {
    check_same(mu.dim(), logvar.dim())?;
    let b = mu.nrows().max(1) as f64;
    let s = Zip::from(mu)
        .and(logvar)
        .fold(0.0, |acc, &m, &lv| acc + m * m + lv.exp() - 1.0 - lv);
    Ok(0.5 * s / b)
}

/// `(∂KL/∂mu, ∂KL/∂logvar)`.
pub fn kl_grad(mu: &Array2<f64>, logvar: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    check_same(mu.dim(), logvar.dim())?;
    let b = mu.nrows().max(1) as f64;
    Ok((mu / b, logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0) / b)))
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_pairs(z: &Array2<f64>, attrs: &Array2<f64>, pairs: &[(usize, usize)]) -> Result<()> {
    if z.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "attribute regularization needs at least 2 samples, got {}",
            z.nrows()
        )));
    }
    if z.nrows() != attrs.nrows() {
        return Err(Error::ShapeMismatch {
            expected: vec![z.nrows()],
            actual: vec![attrs.nrows()],
        });
    }
    for &(k, d) in pairs {
        if k >= attrs.ncols() || d >= z.ncols() {
            return Err(Error::InvalidArgument(format!(
                "pair (attribute {k}, dimension {d}) out of range for {} attributes, {} dimensions",
                attrs.ncols(),
                z.ncols()
            )));
        }
    }
    Ok(())
}

fn pair_loss(z: ArrayView1<f64>, a: ArrayView1<f64>, delta: f64) -> f64 {
    let n = z.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ((delta * (z[i] - z[j])).tanh() - sgn(a[i] - a[j])).abs();
        }
    }
    s / (n * n) as f64
}

/// Monotonicity regularizer. `pairs` holds `(attribute column, latent dim)`;
/// see [`AttributeMapping::resolve`].
pub fn attr_reg_loss(z: &Array2<f64>, attrs: &Array2<f64>, pairs: &[(usize, usize)], delta: f64) -> Result<f64> {
    check_pairs(z, attrs, pairs)?;
    Ok(pairs
        .iter()
        .map(|&(k, d)| pair_loss(z.column(d), attrs.column(k), delta))
        .sum())
}

/// Gradient of [`attr_reg_loss`] with respect to `z`.
///
/// The difference matrices are antisymmetric, so the `(i, j)` and `(j, i)`
/// entries contribute equally: `∂/∂z_i = (2/n²) Σ_j sign(t_ij − s_ij)·δ(1 − t_ij²)`.
pub fn attr_reg_grad(
    z: &Array2<f64>,
    attrs: &Array2<f64>,
    pairs: &[(usize, usize)],
    delta: f64,
) -> Result<Array2<f64>> {
    check_pairs(z, attrs, pairs)?;
    let n = z.nrows();
    let scale = 2.0 / (n * n) as f64;
    let mut g = Array2::zeros(z.dim());
    for &(k, d) in pairs {
        let (zc, ac) = (z.column(d), attrs.column(k));
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let t = (delta * (zc[i] - zc[j])).tanh();
                acc += sgn(t - sgn(ac[i] - ac[j])) * delta * (1.0 - t * t);
            }
            g[[i, d]] += scale * acc;
        }
    }
    Ok(g)
}

/// Binary cross-entropy of class-1 probabilities, averaged over the batch.
pub fn mlp_loss(y_c: &Array1<f64>, labels: &[u8]) -> Result<f64> {
    if y_c.len() != labels.len() || labels.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len()],
            actual: vec![y_c.len()],
        });
    }
    let s: f64 = y_c.iter().zip(labels).map(|(&p, &t)| bce(p, f64::from(t))).sum();
    Ok(s / labels.len() as f64)
}

/// Gradient of [`mlp_loss`] at the classifier's pre-sigmoid output.
pub fn mlp_logit_grad(y_c: &Array1<f64>, labels: &[u8]) -> Result<Array1<f64>> {
    if y_c.len() != labels.len() || labels.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len()],
            actual: vec![y_c.len()],
        });
    }
    let b = labels.len() as f64;
    Ok(Array1::from_iter(y_c.iter().zip(labels).map(|(&p, &t)| (p - f64::from(t)) / b)))
}

/// Batch and model outputs needed to evaluate the full objective.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    /// Targets, `(B, V)`.
    pub x: &'a Array2<f64>,
    /// Reconstruction probabilities, `(B, V)`.
    pub x_hat: &'a Array2<f64>,
    pub mu: &'a Array2<f64>,
    pub logvar: &'a Array2<f64>,
    /// Sampled code fed to the decoder and regularizer.
    pub z: &'a Array2<f64>,
    pub y_c: &'a Array1<f64>,
    /// Attributes, `(B, K)`.
    pub attrs: &'a Array2<f64>,
    pub labels: &'a [u8],
}

/// How the objective is assembled.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub weights: LossWeights,
    pub toggles: Toggles,
    pub recon_kind: ReconLossKind,
    /// `(attribute column, latent dim)` pairs for the regularizer.
    pub pairs: &'a [(usize, usize)],
}

/// Gradients of the total objective with respect to each model output.
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub d_mu: Array2<f64>,
    pub d_logvar: Array2<f64>,
    pub d_z: Array2<f64>,
    pub d_recon_logits: Array2<f64>,
    pub d_class_logits: Array1<f64>,
}

/// Evaluates the weighted objective.
pub fn total_loss(inputs: &LossInputs<'_>, objective: &Objective<'_>) -> Result<LossBreakdown> {
    let recon = recon_loss(inputs.x_hat, inputs.x, objective.recon_kind)?;
    let kl = kl_loss(inputs.mu, inputs.logvar)?;
    let mlp = if objective.toggles.use_mlp {
        mlp_loss(inputs.y_c, inputs.labels)?
    } else {
        0.0
    };
    let ar = if objective.toggles.use_ar {
        attr_reg_loss(inputs.z, inputs.attrs, objective.pairs, objective.weights.delta)?
    } else {
        0.0
    };
    Ok(LossBreakdown::combine(recon, kl, mlp, ar, &objective.weights, objective.toggles))
}

/// [`total_loss`] together with its gradient.
pub fn total_loss_and_grads(inputs: &LossInputs<'_>, objective: &Objective<'_>) -> Result<(LossBreakdown, LossGrads)> {
    let breakdown = total_loss(inputs, objective)?;
    let w = &objective.weights;
    let beta = w.effective_beta(objective.toggles);
    let (dmu, dlv) = kl_grad(inputs.mu, inputs.logvar)?;
    let d_z = if objective.toggles.use_ar && w.gamma != 0.0 {
        attr_reg_grad(inputs.z, inputs.attrs, objective.pairs, w.delta)? * w.gamma
    } else {
        Array2::zeros(inputs.z.dim())
    };
    let d_class_logits = if objective.toggles.use_mlp {
        mlp_logit_grad(inputs.y_c, inputs.labels)?
    } else {
        Array1::zeros(inputs.y_c.len())
    };
    Ok((
        breakdown,
        LossGrads {
            d_mu: dmu * beta,
            d_logvar: dlv * beta,
            d_z,
            d_recon_logits: recon_logit_grad(inputs.x_hat, inputs.x, objective.recon_kind)?,
            d_class_logits,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const LN2: f64 = std::f64::consts::LN_2;

    fn sigmoid(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
    }

    /// Central differences of `f` at `x` with step 1e-5.
    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let h = 1e-5;
        let mut g = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p.as_slice_mut().unwrap()[idx] += h;
            m.as_slice_mut().unwrap()[idx] -= h;
            g.as_slice_mut().unwrap()[idx] = (f(&p) - f(&m)) / (2.0 * h);
        }
        g
    }

    fn assert_close(analytic: &Array2<f64>, numeric: &Array2<f64>, tol: f64) {
        let diff = (analytic - numeric).mapv(f64::abs).sum();
        let scale = numeric.mapv(f64::abs).sum().max(1e-12);
        assert!(diff / scale <= tol, "relative error {} > {tol}", diff / scale);
    }

    #[test]
    fn bce_hand_cases() {
        let half = Array2::from_elem((1, 8), 0.5);
        let ones = Array2::from_elem((1, 8), 1.0);
        assert!((recon_loss(&half, &half, ReconLossKind::Bce).unwrap() - 8.0 * LN2).abs() < 1e-9);
        assert!((recon_loss(&half, &ones, ReconLossKind::Bce).unwrap() - 8.0 * LN2).abs() < 1e-9);
        assert_eq!(recon_loss(&ones, &ones, ReconLossKind::Mse).unwrap(), 0.0);
        let zeros = Array2::zeros((1, 8));
        assert!(recon_loss(&zeros, &ones, ReconLossKind::Bce).unwrap().is_finite());
    }

    #[test]
    fn kl_hand_cases() {
        let z = Array2::zeros((1, 4));
        assert_eq!(kl_loss(&z, &z).unwrap(), 0.0);
        let mut mu = Array2::zeros((1, 4));
        mu[[0, 0]] = 1.0;
        assert!((kl_loss(&mu, &z).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        let mu = [0.7, -0.3, 1.2];
        let lv = [-0.5, 0.4, 0.1];
        let closed = kl_loss(
            &Array2::from_shape_vec((1, 3), mu.to_vec()).unwrap(),
            &Array2::from_shape_vec((1, 3), lv.to_vec()).unwrap(),
        )
        .unwrap();
        // E_q[log q(z) − log p(z)] with z ~ q.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            for d in 0..3 {
                let e: f64 = rng.sample(StandardNormal);
                let s = (lv[d] / 2.0).exp();
                let z = mu[d] + s * e;
                acc += -0.5 * e * e - lv[d] / 2.0 + 0.5 * z * z;
            }
        }
        let mc = acc / draws as f64;
        assert!((mc - closed).abs() / closed <= 0.01, "{mc} vs {closed}");
    }

    #[test]
    fn attr_reg_hand_cases() {
        let z = Array2::from_shape_vec((2, 1), vec![0.0, 10.0]).unwrap();
        let up = Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap();
        let down = Array2::from_shape_vec((2, 1), vec![1.0, 0.0]).unwrap();
        assert!(attr_reg_loss(&z, &up, &[(0, 0)], 10.0).unwrap() <= 1e-3);
        assert_eq!(attr_reg_loss(&z, &down, &[(0, 0)], 10.0).unwrap(), 1.0);
        let flat_z = Array2::from_elem((2, 1), 0.3);
        let flat_a = Array2::from_elem((2, 1), 7.0);
        assert_eq!(attr_reg_loss(&flat_z, &flat_a, &[(0, 0)], 10.0).unwrap(), 0.0);
        assert!(attr_reg_loss(&z.slice(ndarray::s![..1, ..]).to_owned(), &up.slice(ndarray::s![..1, ..]).to_owned(), &[(0, 0)], 10.0).is_err());
    }

    #[test]
    fn mlp_hand_cases() {
        let half = Array1::from_elem(3, 0.5);
        assert!((mlp_loss(&half, &[0, 1, 1]).unwrap() - LN2).abs() < 1e-12);
        let y = Array1::from(vec![0.9, 0.1]);
        let expected = -(0.9f64.ln() + 0.9f64.ln()) / 2.0;
        assert!((mlp_loss(&y, &[1, 0]).unwrap() - expected).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for p in [0.6, 0.7, 0.8, 0.9, 0.99, 0.999] {
            let l = mlp_loss(&Array1::from(vec![p]), &[1]).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn recon_gradient_matches_finite_differences() {
        let logits = random(2, 5, 1);
        let x = random(2, 5, 2).mapv(sigmoid);
        for kind in [ReconLossKind::Bce, ReconLossKind::Mse] {
            let analytic = recon_logit_grad(&logits.mapv(sigmoid), &x, kind).unwrap();
            let numeric = numeric_grad(&logits, |l| recon_loss(&l.mapv(sigmoid), &x, kind).unwrap());
            assert_close(&analytic, &numeric, 1e-4);
        }
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let mu = random(2, 5, 3);
        let lv = random(2, 5, 4) * 0.5;
        let (dmu, dlv) = kl_grad(&mu, &lv).unwrap();
        assert_close(&dmu, &numeric_grad(&mu, |m| kl_loss(m, &lv).unwrap()), 1e-4);
        assert_close(&dlv, &numeric_grad(&lv, |l| kl_loss(&mu, l).unwrap()), 1e-4);
    }

    #[test]
    fn attr_reg_gradient_matches_finite_differences() {
        // Small delta keeps every pair away from the |·| kink.
        let z = random(10, 1, 5);
        let a = random(10, 1, 6);
        let delta = 0.3;
        let analytic = attr_reg_grad(&z, &a, &[(0, 0)], delta).unwrap();
        let numeric = numeric_grad(&z, |z| attr_reg_loss(z, &a, &[(0, 0)], delta).unwrap());
        assert_close(&analytic, &numeric, 1e-4);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let logits = random(10, 1, 7);
        let labels: Vec<u8> = (0..10).map(|i| (i % 3 == 0) as u8).collect();
        let analytic = mlp_logit_grad(&logits.column(0).mapv(sigmoid), &labels).unwrap().insert_axis(ndarray::Axis(1));
        let numeric = numeric_grad(&logits, |l| mlp_loss(&l.column(0).mapv(sigmoid), &labels).unwrap());
        assert_close(&analytic, &numeric, 1e-4);
    }

    #[test]
    fn variant_totals() {
        let w = LossWeights::default();
        let vae = LossBreakdown::combine(3.0, 0.5, 0.7, 0.2, &w, Variant::Vae.toggles());
        assert_eq!(vae.total, 3.5);
        let beta = LossBreakdown::combine(3.0, 0.5, 0.7, 0.2, &w, Variant::BetaVae.toggles());
        assert_eq!(beta.total, 4.0);
        let ar = LossBreakdown::combine(3.0, 0.5, 0.7, 0.2, &w, Variant::ArVae.toggles());
        assert_eq!(ar.total, 4.0 + 200.0 * 0.2);
        let full = LossBreakdown::combine(3.0, 0.5, 0.7, 0.2, &w, Variant::AttriVae.toggles());
        assert_eq!(full.total, 3.0 + 2.0 * 0.5 + 0.7 + 200.0 * 0.2);
        for v in Variant::ALL {
            let b = LossBreakdown::combine(3.0, 0.5, 0.7, 0.2, &w, v.toggles());
            assert_eq!(b.identity_residual(&w, v.toggles()), 0.0);
        }
    }

    #[test]
    fn mapping_validation() {
        assert!(AttributeMapping::new(vec![("a".into(), 0), ("b".into(), 0)]).is_err());
        assert!(AttributeMapping::new(vec![("a".into(), 0), ("a".into(), 1)]).is_err());
        let m = AttributeMapping::new(vec![("a".into(), 3)]).unwrap();
        assert!(m.validate(3).is_err());
        assert!(m.validate(4).is_ok());
        assert_eq!(m.resolve(&["x", "a"]).unwrap(), vec![(1, 3)]);
        assert!(matches!(m.resolve(&["x"]), Err(Error::UnknownAttribute(_))));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"[["a",3]]"#);
    }

    fn batch() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    fn col(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn attr_reg_ignores_monotone_transforms((z, a) in batch()) {
            let base = attr_reg_loss(&col(&z), &col(&a), &[(0, 0)], 10.0).unwrap();
            let t: Vec<f64> = a.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            let moved = attr_reg_loss(&col(&z), &col(&t), &[(0, 0)], 10.0).unwrap();
            prop_assert!((base - moved).abs() < 1e-12);
        }

        #[test]
        fn attr_reg_is_permutation_symmetric((z, a) in batch(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..z.len()).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let zp: Vec<f64> = order.iter().map(|&i| z[i]).collect();
            let ap: Vec<f64> = order.iter().map(|&i| a[i]).collect();
            let base = attr_reg_loss(&col(&z), &col(&a), &[(0, 0)], 10.0).unwrap();
            let perm = attr_reg_loss(&col(&zp), &col(&ap), &[(0, 0)], 10.0).unwrap();
            prop_assert!((base - perm).abs() < 1e-12);
        }

        #[test]
        fn attr_reg_is_bounded((z, a) in batch(), k in 1usize..4) {
            let n = z.len();
            let zs = Array2::from_shape_fn((n, k), |(i, d)| z[i] * (d as f64 + 1.0));
            let as_ = Array2::from_shape_fn((n, k), |(i, d)| a[i] - d as f64 * z[i]);
            let pairs: Vec<(usize, usize)> = (0..k).map(|d| (d, d)).collect();
            let l = attr_reg_loss(&zs, &as_, &pairs, 10.0).unwrap();
            prop_assert!((0.0..=2.0 * k as f64).contains(&l));
        }

        #[test]
        fn kl_is_nonnegative(mu in proptest::collection::vec(-3.0f64..3.0, 6), lv in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let mu = Array2::from_shape_vec((1, 6), mu).unwrap();
            let lv = Array2::from_shape_vec((1, 6), lv).unwrap();
            prop_assert!(kl_loss(&mu, &lv).unwrap() >= 0.0);
        }
    }
}
