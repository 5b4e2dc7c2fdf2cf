//! Synthetic annulus cohort with analytically known generative factors.
//!
//! Each sample is a bright ring (the wall) around a mid-gray disc (the
//! cavity) on a black background. Scarred samples have an angular sector of
//! the wall darkened; their label is 1.

use super::{Dataset, Sample, Volume};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const CAVITY_INTENSITY: f32 = 0.35;
pub const SCAR_INTENSITY: f32 = 0.1;

pub const ATTRIBUTES: [&str; 4] = ["cavity_area", "wall_thickness", "wall_intensity", "scar_fraction"];

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnulusSpec {
    pub n_samples: usize,
    /// Side length in voxels.
    pub image_size: usize,
    /// Render spherical shells in an `image_size³` volume instead of 2D rings.
    pub volumetric: bool,
    pub outer_radius: Range,
    pub wall_thickness: Range,
    pub wall_intensity: Range,
    pub scar_fraction: Range,
    pub scar_probability: f64,
    pub seed: u64,
}

impl Default for AnnulusSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            image_size: 64,
            volumetric: false,
            outer_radius: Range::new(14.0, 26.0),
            wall_thickness: Range::new(3.0, 10.0),
            wall_intensity: Range::new(0.65, 1.0),
            scar_fraction: Range::new(0.1, 0.4),
            scar_probability: 0.5,
            seed: 0,
        }
    }
}

impl AnnulusSpec {
    /// Default geometry rescaled to a different side length.
    pub fn scaled(n_samples: usize, image_size: usize, seed: u64) -> Self {
        let base = Self::default();
        let k = image_size as f64 / base.image_size as f64;
        Self {
            n_samples,
            image_size,
            outer_radius: Range::new(base.outer_radius.lo * k, base.outer_radius.hi * k),
            wall_thickness: Range::new(base.wall_thickness.lo * k, base.wall_thickness.hi * k),
            seed,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_range = |name: &str, r: &Range| {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
                return Err(Error::config(name, format!("need lo <= hi, got [{}, {}]", r.lo, r.hi)));
            }
            Ok(())
        };
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be positive"));
        }
        if self.image_size == 0 {
            return Err(Error::config("image_size", "must be positive"));
        }
        check_range("outer_radius", &self.outer_radius)?;
        check_range("wall_thickness", &self.wall_thickness)?;
        check_range("wall_intensity", &self.wall_intensity)?;
        check_range("scar_fraction", &self.scar_fraction)?;
        if self.wall_thickness.lo <= 0.0 {
            return Err(Error::config("wall_thickness", "lower bound must be positive"));
        }
        if self.wall_thickness.hi >= self.outer_radius.lo {
            return Err(Error::config(
                "wall_thickness",
                format!(
                    "upper bound {} must be below outer_radius lower bound {}",
                    self.wall_thickness.hi, self.outer_radius.lo
                ),
            ));
        }
        if self.outer_radius.hi > self.image_size as f64 / 2.0 {
            return Err(Error::config(
                "outer_radius",
                format!("upper bound {} does not fit in image of size {}", self.outer_radius.hi, self.image_size),
            ));
        }
        if self.wall_intensity.lo < 0.0 || self.wall_intensity.hi > 1.0 {
            return Err(Error::config("wall_intensity", "must lie within [0, 1]"));
        }
        if self.scar_fraction.lo < 0.0 || self.scar_fraction.hi > 0.5 {
            return Err(Error::config("scar_fraction", "must lie within [0, 0.5]"));
        }
        if !(0.0..=1.0).contains(&self.scar_probability) {
            return Err(Error::config("scar_probability", "must lie within [0, 1]"));
        }
        Ok(())
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.image_size;
        if self.volumetric {
            [s, s, s]
        } else {
            [s, s, 1]
        }
    }
}

/// Renders the cohort described by `spec`; deterministic for a fixed seed.
pub fn generate_annulus_dataset(spec: &AnnulusSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shape = spec.shape();
    let width = (spec.n_samples - 1).to_string().len().max(4);
    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let outer = spec.outer_radius.sample(&mut rng);
        let thickness = spec.wall_thickness.sample(&mut rng);
        let intensity = spec.wall_intensity.sample(&mut rng);
        let scarred = rng.random_bool(spec.scar_probability);
        let scar = if scarred { spec.scar_fraction.sample(&mut rng) } else { 0.0 };
        let scar_start = rng.random_range(0.0..TAU);
        let inner = outer - thickness;
        let (volume, cavity) = render(shape, inner, outer, intensity as f32, scar, scar_start);
        samples.push(Sample {
            id: format!("case{i:0width$}"),
            volume,
            attributes: vec![cavity as f64, thickness, intensity, scar],
            label: u8::from(scar > 0.0),
        });
    }
    Dataset::new(samples, ATTRIBUTES.iter().map(|s| s.to_string()).collect(), shape)
}

/// Returns the rendered volume and the number of cavity voxels.
fn render(
    shape: [usize; 3],
    inner: f64,
    outer: f64,
    wall: f32,
    scar_fraction: f64,
    scar_start: f64,
) -> (Volume, usize) {
    let mut vol = Volume::zeros(shape);
    let centre = shape.map(|s| s as f64 / 2.0);
    let scar_span = scar_fraction * TAU;
    let mut cavity = 0;
    for x in 0..shape[0] {
        for y in 0..shape[1] {
            for z in 0..shape[2] {
                let dx = x as f64 + 0.5 - centre[0];
                let dy = y as f64 + 0.5 - centre[1];
                let dz = if shape[2] > 1 { z as f64 + 0.5 - centre[2] } else { 0.0 };
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                let idx = vol.index(x, y, z);
                if r < inner {
                    vol.data[idx] = CAVITY_INTENSITY;
                    cavity += 1;
                } else if r < outer {
                    let angle = dy.atan2(dx).rem_euclid(TAU);
                    let offset = (angle - scar_start).rem_euclid(TAU);
                    vol.data[idx] = if offset < scar_span { SCAR_INTENSITY } else { wall };
                }
            }
        }
    }
    (vol, cavity)
}
