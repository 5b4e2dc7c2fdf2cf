//! Gradient-weighted attention maps for a single latent coordinate.
//!
//! The coordinate is differentiated with respect to the encoder's last conv
//! feature maps `F_i`; each map's weight is the spatial mean of its gradient,
//! and the heat map is `ReLU(Σ_i w_i F_i)`, upsampled to the input grid and
//! scaled to a maximum of 1.

use crate::dataio::Volume;
use crate::error::{Error, Result};
use crate::losses::AttributeMapping;
use crate::model::Vae;
use crate::nn::{interpolate_linear, Scalar, Spatial};
use crate::render::{gray_slice, viridis, RgbImage};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    /// Heat at input resolution, in `[0, 1]`, C-ordered over `shape`.
    pub heat: Vec<f64>,
    pub shape: Spatial,
    pub dimension_index: usize,
    /// Empty when the map was requested by dimension only.
    pub attribute_name: String,
}

impl AttentionMap {
    pub fn max(&self) -> f64 {
        self.heat.iter().copied().fold(0.0, f64::max)
    }
}

/// Feature maps of one input and the pooled gradient weight of each.
#[derive(Debug, Clone)]
pub struct GapWeights {
    /// `(channels, positions)` feature values.
    pub features: Vec<Vec<f64>>,
    pub feature_shape: Spatial,
    pub weights: Vec<f64>,
}

/// Global-average-pooled gradients of `z[dim]` for a single input.
///
/// `noise` selects the sampled code `mu + noise · exp(logvar / 2)`; `None`
/// uses the posterior mean.
pub fn gap_weights<S: Scalar>(model: &Vae<S>, x: &Volume, dim: usize, noise: Option<f64>) -> Result<GapWeights> {
    if dim >= model.latent_dim() {
        return Err(Error::InvalidArgument(format!(
            "latent dimension {dim} out of range (D = {})",
            model.latent_dim()
        )));
    }
    let input = model.input_batch(&[x])?;
    let features = model.encode_features(&input)?;
    let noise = noise.map(|n| [S::from_f64_lossy(n)]);
    let grad = model.latent_grad_wrt_features(&features, dim, noise.as_ref().map(|n| &n[..]))?;
    let channels = features.channels();
    let weights = (0..channels)
        .map(|c| {
            let g = grad.sample_channel(0, c);
            g.iter().map(|v| v.as_f64()).sum::<f64>() / g.len() as f64
        })
        .collect();
    Ok(GapWeights {
        features: (0..channels)
            .map(|c| features.sample_channel(0, c).iter().map(|v| v.as_f64()).collect())
            .collect(),
        feature_shape: features.spatial,
        weights,
    })
}

/// Attention map of latent coordinate `dim` for input `x`.
pub fn attention_map<S: Scalar>(model: &Vae<S>, x: &Volume, dim: usize, noise: Option<f64>) -> Result<AttentionMap> {
    let gap = gap_weights(model, x, dim, noise)?;
    let positions = gap.features.first().map_or(0, |f| f.len());
    let coarse: Vec<f64> = (0..positions)
        .map(|p| {
            let s: f64 = gap.features.iter().zip(&gap.weights).map(|(f, w)| w * f[p]).sum();
            s.max(0.0)
        })
        .collect();
    let mut heat = interpolate_linear(&coarse, gap.feature_shape, x.shape);
    heat.iter_mut().for_each(|v| *v = v.max(0.0));
    let peak = heat.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        heat.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(AttentionMap {
        heat,
        shape: x.shape,
        dimension_index: dim,
        attribute_name: String::new(),
    })
}

/// Attention map for a mapped attribute.
pub fn attribute_attention<S: Scalar>(
    model: &Vae<S>,
    x: &Volume,
    mapping: &AttributeMapping,
    attribute: &str,
) -> Result<AttentionMap> {
    let dim = mapping
        .dim_of(attribute)
        .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))?;
    let mut map = attention_map(model, x, dim, None)?;
    map.attribute_name = attribute.to_string();
    Ok(map)
}

/// Per-slice blend of the grayscale input with the colored heat map:
/// `(1 − alpha) · gray + alpha · viridis(heat)`.
pub fn overlay(map: &AttentionMap, x: &Volume, alpha: f64) -> Result<Vec<RgbImage>> {
    if map.shape != x.shape {
        return Err(Error::ShapeMismatch {
            expected: x.shape.to_vec(),
            actual: map.shape.to_vec(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let [_, _, depth] = x.shape;
    Ok((0..depth)
        .map(|z| {
            let mut img = gray_slice(x, z);
            let heat = map.heat.iter().skip(z).step_by(depth);
            for (p, &h) in img.pixels.iter_mut().zip(heat) {
                let c = viridis(h);
                *p = [0, 1, 2].map(|k| (1.0 - alpha) * p[k] + alpha * c[k]);
            }
            img
        })
        .collect())
}

/// Writes each overlay slice as `<sample>_<attr>_<slice>.png`.
pub fn write_overlays(
    map: &AttentionMap,
    x: &Volume,
    alpha: f64,
    sample_id: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let label = if map.attribute_name.is_empty() {
        format!("dim{}", map.dimension_index)
    } else {
        map.attribute_name.clone()
    };
    overlay(map, x, alpha)?
        .iter()
        .enumerate()
        .map(|(z, img)| {
            let path = dir.join(format!("{sample_id}_{label}_{z}.png"));
            img.write_png(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ModelConfig {
        ModelConfig {
            latent_dim: 4,
            embedding_dim: 8,
            conv_channels: vec![2, 2, 3, 3, 3],
            fc_hidden: vec![12, 10],
            image_shape: [64, 64, 1],
            mlp_hidden: vec![4, 4],
            ..ModelConfig::default()
        }
    }

    fn random_volume(seed: u64) -> Volume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume::new([64, 64, 1], (0..4096).map(|_| rng.random::<f32>()).collect()).unwrap()
    }

    #[test]
    fn heat_is_normalized_and_input_sized() {
        let model = Vae::<f64>::new(small_config(), 3).unwrap();
        let x = random_volume(1);
        for dim in 0..4 {
            let m = attention_map(&model, &x, dim, None).unwrap();
            assert_eq!(m.heat.len(), 4096);
            assert!(m.heat.iter().all(|&h| (0.0..=1.0).contains(&h)));
            assert!(m.max() == 0.0 || (m.max() - 1.0).abs() < 1e-12);
        }
        assert!(attention_map(&model, &x, 4, None).is_err());
    }

    #[test]
    fn deterministic_without_noise() {
        let model = Vae::<f32>::new(small_config(), 3).unwrap();
        let x = random_volume(2);
        assert_eq!(attention_map(&model, &x, 1, None).unwrap(), attention_map(&model, &x, 1, None).unwrap());
    }

    #[test]
    fn sampled_path_with_zero_noise_matches_mean_path() {
        let model = Vae::<f64>::new(small_config(), 5).unwrap();
        let x = random_volume(3);
        let a = gap_weights(&model, &x, 2, None).unwrap();
        let b = gap_weights(&model, &x, 2, Some(0.0)).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn overlay_blend_extremes() {
        let x = random_volume(4);
        let map = AttentionMap {
            heat: (0..4096).map(|i| (i % 7) as f64 / 6.0).collect(),
            shape: x.shape,
            dimension_index: 0,
            attribute_name: "a".into(),
        };
        let gray = overlay(&map, &x, 0.0).unwrap();
        assert_eq!(gray[0], gray_slice(&x, 0));
        let pure = overlay(&map, &x, 1.0).unwrap();
        for (p, &h) in pure[0].pixels.iter().zip(&map.heat) {
            assert_eq!(*p, viridis(h));
        }
        let zero = AttentionMap { heat: vec![0.0; 4096], ..map };
        let flat = overlay(&zero, &Volume::zeros(x.shape), 0.4).unwrap();
        let c = viridis(0.0).map(|v| 0.4 * v);
        assert!(flat[0].pixels.iter().all(|p| p.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-15)));
    }

    #[test]
    fn overlay_files_are_named_per_slice() {
        let dir = tempfile::tempdir().unwrap();
        let x = Volume::zeros([8, 8, 3]);
        let map = AttentionMap {
            heat: vec![0.5; 192],
            shape: x.shape,
            dimension_index: 2,
            attribute_name: "wall_thickness".into(),
        };
        let paths = write_overlays(&map, &x, 0.5, "case0001", dir.path()).unwrap();
        let names: Vec<_> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["case0001_wall_thickness_0.png", "case0001_wall_thickness_1.png", "case0001_wall_thickness_2.png"]);
    }

    fn jittered(config: ModelConfig, seed: u64) -> Vae<f64> {
        let mut model = Vae::<f64>::new(config, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        model.visit_params(&mut |_, v, _| v.iter_mut().for_each(|x| *x += rng.random_range(-0.1..0.1)));
        model
    }

    #[test]
    fn pooled_weights_match_finite_differences() {
        let model = jittered(small_config(), 6);
        let x = random_volume(5);
        assert_eq!(model.feature_spatial(), [4, 4, 1]);
        let features = model.encode_features(&model.input_batch(&[&x]).unwrap()).unwrap();
        for noise in [None, Some(-1.3)] {
            let gap = gap_weights(&model, &x, 1, noise).unwrap();
            let code = |f: &crate::nn::FeatureMap<f64>| {
                let (mu, lv) = model.head_from_features(f);
                mu[[0, 1]] + noise.unwrap_or(0.0) * (lv[[0, 1]] / 2.0).exp()
            };
            for c in 0..features.channels() {
                // Shifting a whole channel by h changes z by h · Σ_p ∂z/∂F_c[p].
                let h = 1e-4;
                let shifted = |sign: f64| {
                    let mut f = features.clone();
                    f.data.row_mut(c).iter_mut().for_each(|v| *v += sign * h);
                    code(&f)
                };
                let numeric = (shifted(1.0) - shifted(-1.0)) / (2.0 * h) / 16.0;
                let w = gap.weights[c];
                assert!(
                    (w - numeric).abs() <= 1e-3 * w.abs().max(numeric.abs()).max(1e-6),
                    "channel {c}: {w} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn scaling_the_mean_head_row_scales_weights_not_heat() {
        let mut model = jittered(small_config(), 7);
        let x = random_volume(6);
        let before_w = gap_weights(&model, &x, 3, None).unwrap().weights;
        let before = attention_map(&model, &x, 3, None).unwrap();
        model.mu_head_mut().weight.value.row_mut(3).iter_mut().for_each(|v| *v *= 2.5);
        let after_w = gap_weights(&model, &x, 3, None).unwrap().weights;
        let after = attention_map(&model, &x, 3, None).unwrap();
        for (a, b) in before_w.iter().zip(&after_w) {
            assert!((2.5 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in before.heat.iter().zip(&after.heat) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_feature_channel() {
        let config = ModelConfig {
            conv_channels: vec![2, 2, 2, 2, 1],
            ..small_config()
        };
        let model = jittered(config, 8);
        let x = random_volume(7);
        let gap = gap_weights(&model, &x, 0, None).unwrap();
        assert_eq!(gap.weights.len(), 1);
        let map = attention_map(&model, &x, 0, None).unwrap();
        assert_eq!(map.heat.len(), 4096);
        assert!(map.heat.iter().all(|h| (0.0..=1.0).contains(h)));
    }
}
