use super::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Duplicates minority-class samples (with replacement) until both classes
/// are equally represented, then shuffles deterministically by `seed`.
pub fn oversample_minority(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let (zeros, ones) = dataset.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::SingleClass);
    }
    let minority: u8 = if ones < zeros { 1 } else { 0 };
    let pool: Vec<usize> = dataset
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == minority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..zeros.abs_diff(ones) {
        indices.push(pool[rng.random_range(0..pool.len())]);
    }
    indices.shuffle(&mut rng);
    Ok(dataset.select(&indices))
}
