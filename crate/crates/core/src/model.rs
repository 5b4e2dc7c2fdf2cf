//! Convolutional encoder/decoder with a latent classification head.
//!
//! Encoder: five convolutions (strides 2,2,2,2,1) each followed by batch
//! normalization and ReLU, three fully connected layers to the embedding,
//! and two linear heads for the posterior mean and log-variance. The decoder
//! mirrors it with nearest-neighbour upsampling and ends in a sigmoid. The
//! classifier is a three-layer MLP on the latent code.

use crate::dataio::Volume;
use crate::error::{Error, Result};
use crate::nn::{
    relu, relu_backward, sigmoid, upsample_nearest, upsample_nearest_backward, BatchNorm,
    BatchNormCache, BufferVisitor, Conv3, FeatureMap, Linear, ParamVisitor, Scalar, Spatial,
};
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReconLossKind {
    #[default]
    Bce,
    Mse,
}

/// Which loss terms are active; the four combinations used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    pub use_beta: bool,
    pub use_mlp: bool,
    pub use_ar: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Variant::AttriVae.toggles()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain VAE: no β weighting, no classifier, no attribute regularization.
    Vae,
    /// β-weighted KL only.
    BetaVae,
    /// β-VAE plus attribute regularization.
    ArVae,
    /// All four loss terms.
    AttriVae,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Vae, Variant::BetaVae, Variant::ArVae, Variant::AttriVae];

    pub fn toggles(self) -> Toggles {
        let (use_beta, use_mlp, use_ar) = match self {
            Variant::Vae => (false, false, false),
            Variant::BetaVae => (true, false, false),
            Variant::ArVae => (true, false, true),
            Variant::AttriVae => (true, true, true),
        };
        Toggles {
            use_beta,
            use_mlp,
            use_ar,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vae => "vae",
            Variant::BetaVae => "beta_vae",
            Variant::ArVae => "ar_vae",
            Variant::AttriVae => "attri_vae",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub embedding_dim: usize,
    pub conv_channels: Vec<usize>,
    /// Widths of the two hidden fully connected layers between the flattened
    /// conv features and the embedding (mirrored in the decoder).
    pub fc_hidden: Vec<usize>,
    pub image_shape: Spatial,
    pub mlp_hidden: Vec<usize>,
    pub recon_loss_kind: ReconLossKind,
    pub toggles: Toggles,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            embedding_dim: 250,
            conv_channels: vec![16, 32, 64, 64, 64],
            fc_hidden: vec![512, 256],
            image_shape: [64, 64, 1],
            mlp_hidden: vec![32, 16],
            recon_loss_kind: ReconLossKind::Bce,
            toggles: Toggles::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.len() != 5 {
            return Err(Error::config("conv_channels", "exactly 5 entries required"));
        }
        if self.conv_channels.contains(&0) {
            return Err(Error::config("conv_channels", "entries must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be positive"));
        }
        if self.latent_dim > self.embedding_dim {
            return Err(Error::config(
                "latent_dim",
                format!("{} exceeds embedding_dim {}", self.latent_dim, self.embedding_dim),
            ));
        }
        if self.fc_hidden.len() != 2 || self.fc_hidden.contains(&0) {
            return Err(Error::config("fc_hidden", "exactly 2 positive entries required"));
        }
        if self.mlp_hidden.len() != 2 || self.mlp_hidden.contains(&0) {
            return Err(Error::config("mlp_hidden", "exactly 2 positive entries required"));
        }
        if self.image_shape.contains(&0) {
            return Err(Error::config("image_shape", "extents must be positive"));
        }
        Ok(())
    }
}

/// `z = mu + noise ⊙ exp(logvar / 2)`.
pub fn reparameterize<S: Scalar>(mu: &Array2<S>, logvar: &Array2<S>, noise: &Array2<S>) -> Array2<S> {
    let half = S::from_f64_lossy(0.5);
    mu + &(noise * &logvar.mapv(|v| (v * half).exp()))
}

/// Per-sample latent statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Vae<S> {
    config: ModelConfig,
    enc_convs: Vec<Conv3<S>>,
    enc_norms: Vec<BatchNorm<S>>,
    enc_fc: Vec<Linear<S>>,
    mu_head: Linear<S>,
    logvar_head: Linear<S>,
    dec_fc: Vec<Linear<S>>,
    dec_convs: Vec<Conv3<S>>,
    dec_norms: Vec<BatchNorm<S>>,
    mlp: Vec<Linear<S>>,
    /// Input spatial extent of each encoder conv.
    stage_spatial: Vec<Spatial>,
    feature_spatial: Spatial,
}

/// Everything a training step keeps from the forward pass.
#[derive(Debug, Clone)]
pub struct Tape<S> {
    enc_cols: Vec<Array2<S>>,
    enc_bn: Vec<(BatchNormCache<S>, Array1<S>, Array1<S>)>,
    enc_act: Vec<FeatureMap<S>>,
    fc_in: Vec<Array2<S>>,
    fc_act: Vec<Array2<S>>,
    embedding: Array2<S>,
    pub mu: Array2<S>,
    pub logvar: Array2<S>,
    pub noise: Array2<S>,
    pub z: Array2<S>,
    dec_fc_in: Vec<Array2<S>>,
    dec_fc_act: Vec<Array2<S>>,
    dec_up: Vec<FeatureMap<S>>,
    dec_cols: Vec<Array2<S>>,
    dec_bn: Vec<(BatchNormCache<S>, Array1<S>, Array1<S>)>,
    dec_act: Vec<FeatureMap<S>>,
    /// Reconstruction probabilities, `(B, V)`.
    pub x_hat: Array2<S>,
    mlp_in: Vec<Array2<S>>,
    mlp_act: Vec<Array2<S>>,
    /// Class-1 probabilities, length B.
    pub y_c: Array1<S>,
}

/// Gradients of the loss with respect to the network outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads<S> {
    pub d_mu: Array2<S>,
    pub d_logvar: Array2<S>,
    /// Gradient flowing into the sampled code from losses on `z` itself.
    pub d_z: Array2<S>,
    /// Gradient at the decoder's pre-sigmoid output, `(B, V)`.
    pub d_recon_logits: Array2<S>,
    /// Gradient at the classifier's pre-sigmoid output, length B.
    pub d_class_logits: Array1<S>,
}

impl<S: Scalar> Vae<S> {
    /// Builds the network with Xavier-uniform weights and zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = &config.conv_channels;
        let strides = [2, 2, 2, 2, 1];
        let mut stage_spatial = Vec::with_capacity(5);
        let mut enc_convs = Vec::with_capacity(5);
        let mut spatial = config.image_shape;
        let mut in_ch = 1;
        for (i, &out_ch) in ch.iter().enumerate() {
            stage_spatial.push(spatial);
            let conv = Conv3::new(in_ch, out_ch, spatial, strides[i], &mut rng);
            spatial = conv.output_spatial();
            in_ch = out_ch;
            enc_convs.push(conv);
        }
        let feature_spatial = spatial;
        let flat = ch[4] * feature_spatial.iter().product::<usize>();
        let [h0, h1] = [config.fc_hidden[0], config.fc_hidden[1]];
        let enc_fc = vec![
            Linear::new(flat, h0, &mut rng),
            Linear::new(h0, h1, &mut rng),
            Linear::new(h1, config.embedding_dim, &mut rng),
        ];
        let mu_head = Linear::new(config.embedding_dim, config.latent_dim, &mut rng);
        let logvar_head = Linear::new(config.embedding_dim, config.latent_dim, &mut rng);
        let dec_fc = vec![
            Linear::new(config.latent_dim, h1, &mut rng),
            Linear::new(h1, h0, &mut rng),
            Linear::new(h0, flat, &mut rng),
        ];
        // Decoder stage k convolves at the input extent of encoder stage 4-k.
        let mut dec_convs = Vec::with_capacity(5);
        let dec_in = [ch[4], ch[3], ch[2], ch[1], ch[0]];
        let dec_out = [ch[3], ch[2], ch[1], ch[0], 1];
        for k in 0..5 {
            dec_convs.push(Conv3::new(dec_in[k], dec_out[k], stage_spatial[4 - k], 1, &mut rng));
        }
        let mlp = vec![
            Linear::new(config.latent_dim, config.mlp_hidden[0], &mut rng),
            Linear::new(config.mlp_hidden[0], config.mlp_hidden[1], &mut rng),
            Linear::new(config.mlp_hidden[1], 1, &mut rng),
        ];
        Ok(Self {
            enc_norms: ch.iter().map(|&c| BatchNorm::new(c)).collect(),
            dec_norms: dec_out[..4].iter().map(|&c| BatchNorm::new(c)).collect(),
            config,
            enc_convs,
            enc_fc,
            mu_head,
            logvar_head,
            dec_fc,
            dec_convs,
            mlp,
            stage_spatial,
            feature_spatial,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Spatial extent of the last encoder feature maps.
    pub fn feature_spatial(&self) -> Spatial {
        self.feature_spatial
    }

    pub fn feature_channels(&self) -> usize {
        self.config.conv_channels[4]
    }

    pub fn voxels(&self) -> usize {
        self.config.image_shape.iter().product()
    }

    /// Stacks volumes into a single-channel input batch, checking their shape.
    pub fn input_batch(&self, volumes: &[&Volume]) -> Result<FeatureMap<S>> {
        let shape = self.config.image_shape;
        let mut data = Vec::with_capacity(volumes.len() * self.voxels());
        for v in volumes {
            if v.shape != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape.to_vec(),
                    actual: v.shape.to_vec(),
                });
            }
            data.extend(v.data.iter().map(|&x| S::from_f64_lossy(x as f64)));
        }
        let data = Array2::from_shape_vec((1, data.len()), data).expect("length matches");
        Ok(FeatureMap {
            data,
            batch: volumes.len(),
            spatial: shape,
        })
    }

    /// Last conv block output (after batch norm and ReLU), evaluation mode.
    pub fn encode_features(&self, x: &FeatureMap<S>) -> Result<FeatureMap<S>> {
        if x.spatial != self.config.image_shape || x.channels() != 1 {
            let mut actual = vec![x.channels()];
            actual.extend(x.spatial);
            let mut expected = vec![1];
            expected.extend(self.config.image_shape);
            return Err(Error::ShapeMismatch { expected, actual });
        }
        let mut h = x.clone();
        for (conv, bn) in self.enc_convs.iter().zip(&self.enc_norms) {
            let y = bn.forward_eval(&conv.forward(&h));
            h = FeatureMap {
                data: relu(&y.data),
                ..y
            };
        }
        Ok(h)
    }

    /// Posterior `(mu, logvar)` from last-conv feature maps.
    pub fn head_from_features(&self, features: &FeatureMap<S>) -> (Array2<S>, Array2<S>) {
        let mut h = features.to_batch_major();
        for fc in &self.enc_fc {
            h = relu(&fc.forward(&h));
        }
        (self.mu_head.forward(&h), self.logvar_head.forward(&h))
    }

    /// Evaluation-mode posterior parameters, each `(B, D)`.
    pub fn encode(&self, x: &FeatureMap<S>) -> Result<(Array2<S>, Array2<S>)> {
        Ok(self.head_from_features(&self.encode_features(x)?))
    }

    pub fn encode_volumes(&self, volumes: &[&Volume]) -> Result<(Array2<S>, Array2<S>)> {
        self.encode(&self.input_batch(volumes)?)
    }

    fn check_latent(&self, z: &Array2<S>) -> Result<()> {
        if z.ncols() != self.config.latent_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![z.nrows(), self.config.latent_dim],
                actual: vec![z.nrows(), z.ncols()],
            });
        }
        Ok(())
    }

    /// Evaluation-mode reconstruction probabilities, `(B, V)`.
    pub fn decode(&self, z: &Array2<S>) -> Result<Array2<S>> {
        self.check_latent(z)?;
        let mut h = z.clone();
        for fc in &self.dec_fc {
            h = relu(&fc.forward(&h));
        }
        let mut fmap = FeatureMap::from_batch_major(&h, self.feature_channels(), self.feature_spatial);
        for k in 0..5 {
            if fmap.spatial != self.stage_spatial[4 - k] {
                fmap = upsample_nearest(&fmap, self.stage_spatial[4 - k]);
            }
            let y = self.dec_convs[k].forward(&fmap);
            fmap = if k < 4 {
                let y = self.dec_norms[k].forward_eval(&y);
                FeatureMap {
                    data: relu(&y.data),
                    ..y
                }
            } else {
                y
            };
        }
        Ok(fmap.to_batch_major().mapv(sigmoid))
    }

    pub fn decode_volumes(&self, z: &Array2<S>) -> Result<Vec<Volume>> {
        let x_hat = self.decode(z)?;
        Ok(x_hat
            .rows()
            .into_iter()
            .map(|r| Volume {
                shape: self.config.image_shape,
                data: r.iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect())
    }

    /// Class-1 probability for each latent code.
    pub fn classify(&self, z: &Array2<S>) -> Result<Array1<S>> {
        self.check_latent(z)?;
        let mut h = z.clone();
        for (i, fc) in self.mlp.iter().enumerate() {
            h = fc.forward(&h);
            if i < 2 {
                h = relu(&h);
            }
        }
        Ok(h.column(0).mapv(sigmoid))
    }

    /// Training-mode forward pass (batch statistics) keeping intermediates.
    ///
    /// Does not modify the model; apply [`Vae::commit_running_stats`] after.
    pub fn forward_tape(&self, x: &FeatureMap<S>, noise: &Array2<S>) -> Result<Tape<S>> {
        if x.spatial != self.config.image_shape {
            return Err(Error::ShapeMismatch {
                expected: self.config.image_shape.to_vec(),
                actual: x.spatial.to_vec(),
            });
        }
        if noise.dim() != (x.batch, self.config.latent_dim) {
            return Err(Error::ShapeMismatch {
                expected: vec![x.batch, self.config.latent_dim],
                actual: vec![noise.nrows(), noise.ncols()],
            });
        }
        let mut enc_cols = Vec::with_capacity(5);
        let mut enc_bn = Vec::with_capacity(5);
        let mut enc_act = Vec::with_capacity(5);
        let mut h = x.clone();
        for (conv, bn) in self.enc_convs.iter().zip(&self.enc_norms) {
            let (y, cols) = conv.forward_with_cols(&h);
            let (y, cache, mean, var) = bn.forward_batch_stats(&y);
            h = FeatureMap {
                data: relu(&y.data),
                ..y
            };
            enc_cols.push(cols);
            enc_bn.push((cache, mean, var));
            enc_act.push(h.clone());
        }
        let mut fc_in = Vec::with_capacity(3);
        let mut fc_act = Vec::with_capacity(3);
        let mut v = h.to_batch_major();
        for fc in &self.enc_fc {
            fc_in.push(v.clone());
            v = relu(&fc.forward(&v));
            fc_act.push(v.clone());
        }
        let embedding = v;
        let mu = self.mu_head.forward(&embedding);
        let logvar = self.logvar_head.forward(&embedding);
        let z = reparameterize(&mu, &logvar, noise);

        let mut dec_fc_in = Vec::with_capacity(3);
        let mut dec_fc_act = Vec::with_capacity(3);
        let mut v = z.clone();
        for fc in &self.dec_fc {
            dec_fc_in.push(v.clone());
            v = relu(&fc.forward(&v));
            dec_fc_act.push(v.clone());
        }
        let mut fmap = FeatureMap::from_batch_major(&v, self.feature_channels(), self.feature_spatial);
        let mut dec_up = Vec::with_capacity(5);
        let mut dec_cols = Vec::with_capacity(5);
        let mut dec_bn = Vec::with_capacity(4);
        let mut dec_act = Vec::with_capacity(4);
        for k in 0..5 {
            dec_up.push(fmap.clone());
            if fmap.spatial != self.stage_spatial[4 - k] {
                fmap = upsample_nearest(&fmap, self.stage_spatial[4 - k]);
            }
            let (y, cols) = self.dec_convs[k].forward_with_cols(&fmap);
            dec_cols.push(cols);
            fmap = if k < 4 {
                let (y, cache, mean, var) = self.dec_norms[k].forward_batch_stats(&y);
                dec_bn.push((cache, mean, var));
                let a = FeatureMap {
                    data: relu(&y.data),
                    ..y
                };
                dec_act.push(a.clone());
                a
            } else {
                y
            };
        }
        let x_hat = fmap.to_batch_major().mapv(sigmoid);

        let mut mlp_in = Vec::with_capacity(3);
        let mut mlp_act = Vec::with_capacity(3);
        let mut v = z.clone();
        for (i, fc) in self.mlp.iter().enumerate() {
            mlp_in.push(v.clone());
            v = fc.forward(&v);
            if i < 2 {
                v = relu(&v);
            }
            mlp_act.push(v.clone());
        }
        let y_c = v.column(0).mapv(sigmoid);

        Ok(Tape {
            enc_cols,
            enc_bn,
            enc_act,
            fc_in,
            fc_act,
            embedding,
            mu,
            logvar,
            noise: noise.clone(),
            z,
            dec_fc_in,
            dec_fc_act,
            dec_up,
            dec_cols,
            dec_bn,
            dec_act,
            x_hat,
            mlp_in,
            mlp_act,
            y_c,
        })
    }

    /// Folds the tape's batch statistics into the batch-norm running estimates.
    pub fn commit_running_stats(&mut self, tape: &Tape<S>) {
        let norms = self.enc_norms.iter_mut().chain(self.dec_norms.iter_mut());
        let stats = tape.enc_bn.iter().chain(&tape.dec_bn);
        let counts = tape
            .enc_act
            .iter()
            .chain(&tape.dec_act)
            .map(|a| a.data.ncols());
        for ((bn, (_, mean, var)), n) in norms.zip(stats).zip(counts) {
            let m = S::from_f64_lossy(bn.momentum);
            let unbias = if n > 1 {
                S::from_f64_lossy(n as f64 / (n - 1) as f64)
            } else {
                S::one()
            };
            bn.running_mean = &bn.running_mean * (S::one() - m) + &(mean * m);
            bn.running_var = &bn.running_var * (S::one() - m) + &(var * (m * unbias));
        }
    }

    /// Accumulates parameter gradients for one tape.
    pub fn backward(&mut self, tape: &Tape<S>, grads: &OutputGrads<S>) {
        // Decoder.
        let mut d = FeatureMap::from_batch_major(
            &grads.d_recon_logits,
            1,
            self.config.image_shape,
        );
        for k in (0..5).rev() {
            if k < 4 {
                d.data = relu_backward(&tape.dec_act[k].data, &d.data);
                d = self.dec_norms[k].backward(&tape.dec_bn[k].0, &d);
            }
            d = self.dec_convs[k].backward(&tape.dec_cols[k], &d);
            let before = &tape.dec_up[k];
            if before.spatial != d.spatial {
                d = upsample_nearest_backward(&d, before.spatial);
            }
        }
        let mut dv = d.to_batch_major();
        for i in (0..3).rev() {
            dv = relu_backward(&tape.dec_fc_act[i], &dv);
            dv = self.dec_fc[i].backward(&tape.dec_fc_in[i], &dv);
        }
        let mut dz = dv + &grads.d_z;

        // Classifier.
        let mut dm = grads.d_class_logits.clone().insert_axis(Axis(1));
        for i in (0..3).rev() {
            if i < 2 {
                dm = relu_backward(&tape.mlp_act[i], &dm);
            }
            dm = self.mlp[i].backward(&tape.mlp_in[i], &dm);
        }
        dz += &dm;

        // Reparameterization.
        let half = S::from_f64_lossy(0.5);
        let d_mu = &grads.d_mu + &dz;
        let sigma = tape.logvar.mapv(|v| (v * half).exp());
        let d_logvar = &grads.d_logvar + &(&dz * &tape.noise * &sigma * half);

        // Encoder.
        let mut de = self.mu_head.backward(&tape.embedding, &d_mu);
        de += &self.logvar_head.backward(&tape.embedding, &d_logvar);
        for i in (0..3).rev() {
            de = relu_backward(&tape.fc_act[i], &de);
            de = self.enc_fc[i].backward(&tape.fc_in[i], &de);
        }
        let mut d = FeatureMap::from_batch_major(&de, self.feature_channels(), self.feature_spatial);
        for k in (0..5).rev() {
            d.data = relu_backward(&tape.enc_act[k].data, &d.data);
            d = self.enc_norms[k].backward(&tape.enc_bn[k].0, &d);
            d = self.enc_convs[k].backward(&tape.enc_cols[k], &d);
        }
    }

    /// Gradient of `z[b, dim]` with respect to the last conv feature maps,
    /// evaluation mode, one map per sample.
    ///
    /// Without `noise` the code is the posterior mean; with it,
    /// `z = mu + noise[b] · exp(logvar / 2)` and the log-variance path is
    /// included.
    pub fn latent_grad_wrt_features(
        &self,
        features: &FeatureMap<S>,
        dim: usize,
        noise: Option<&[S]>,
    ) -> Result<FeatureMap<S>> {
        if dim >= self.config.latent_dim {
            return Err(Error::InvalidArgument(format!(
                "latent dimension {dim} out of range (D = {})",
                self.config.latent_dim
            )));
        }
        if let Some(n) = noise {
            if n.len() != features.batch {
                return Err(Error::ShapeMismatch {
                    expected: vec![features.batch],
                    actual: vec![n.len()],
                });
            }
        }
        let mut acts = Vec::with_capacity(3);
        let mut h = features.to_batch_major();
        for fc in &self.enc_fc {
            h = relu(&fc.forward(&h));
            acts.push(h.clone());
        }
        // mu[:, dim] = h · W_mu[dim, :] + b_mu[dim]
        let w_mu = self.mu_head.weight.value.row(dim);
        let mut dh = Array2::from_shape_fn((h.nrows(), h.ncols()), |(_, j)| w_mu[j]);
        if let Some(noise) = noise {
            let w_lv = self.logvar_head.weight.value.row(dim);
            let b_lv = self.logvar_head.bias.value[dim];
            let half = S::from_f64_lossy(0.5);
            for (b, mut row) in dh.rows_mut().into_iter().enumerate() {
                let lv = h.row(b).dot(&w_lv) + b_lv;
                let scale = noise[b] * half * (lv * half).exp();
                row.zip_mut_with(&w_lv, |g, &w| *g += scale * w);
            }
        }
        for i in (0..3).rev() {
            dh = relu_backward(&acts[i], &dh);
            dh = dh.dot(&self.enc_fc[i].weight.value);
        }
        Ok(FeatureMap::from_batch_major(
            &dh,
            self.feature_channels(),
            self.feature_spatial,
        ))
    }

    pub fn logvar_head_mut(&mut self) -> &mut Linear<S> {
        &mut self.logvar_head
    }

    pub fn mu_head_mut(&mut self) -> &mut Linear<S> {
        &mut self.mu_head
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |_, _, g| g.iter_mut().for_each(|v| *v = S::zero()));
    }

    /// Visits every trainable parameter in a fixed order.
    pub fn visit_params(&mut self, f: &mut ParamVisitor<'_, S>) {
        for (i, (c, n)) in self.enc_convs.iter_mut().zip(&mut self.enc_norms).enumerate() {
            c.visit(&format!("encoder.conv{i}"), f);
            n.visit(&format!("encoder.norm{i}"), f);
        }
        for (i, l) in self.enc_fc.iter_mut().enumerate() {
            l.visit(&format!("encoder.fc{i}"), f);
        }
        self.mu_head.visit("encoder.mu", f);
        self.logvar_head.visit("encoder.logvar", f);
        for (i, l) in self.dec_fc.iter_mut().enumerate() {
            l.visit(&format!("decoder.fc{i}"), f);
        }
        for (i, c) in self.dec_convs.iter_mut().enumerate() {
            c.visit(&format!("decoder.conv{i}"), f);
            if let Some(n) = self.dec_norms.get_mut(i) {
                n.visit(&format!("decoder.norm{i}"), f);
            }
        }
        for (i, l) in self.mlp.iter_mut().enumerate() {
            l.visit(&format!("classifier.fc{i}"), f);
        }
    }

    /// Visits batch-norm running statistics in a fixed order.
    pub fn visit_buffers(&mut self, f: &mut BufferVisitor<'_, S>) {
        for (i, n) in self.enc_norms.iter_mut().enumerate() {
            n.visit_buffers(&format!("encoder.norm{i}"), f);
        }
        for (i, n) in self.dec_norms.iter_mut().enumerate() {
            n.visit_buffers(&format!("decoder.norm{i}"), f);
        }
    }

    pub fn parameter_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, v, _| n += v.len());
        n
    }

    /// Same architecture and weights in another precision.
    pub fn cast<T: Scalar>(&self) -> Vae<T> {
        let mut out = Vae::<T>::new(self.config.clone(), 0).expect("config already validated");
        let mut src = self.clone();
        let mut values: Vec<Vec<T>> = Vec::new();
        src.visit_params(&mut |_, v, _| values.push(v.iter().map(|x| T::from_f64_lossy(x.as_f64())).collect()));
        src.visit_buffers(&mut |_, v| values.push(v.iter().map(|x| T::from_f64_lossy(x.as_f64())).collect()));
        let mut it = values.into_iter();
        out.visit_params(&mut |_, v, _| v.copy_from_slice(&it.next().expect("same layout")));
        out.visit_buffers(&mut |_, v| v.copy_from_slice(&it.next().expect("same layout")));
        out
    }
}
