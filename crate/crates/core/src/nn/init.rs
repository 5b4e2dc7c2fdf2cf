use super::Scalar;
use ndarray::Array2;
use rand::Rng;

/// Xavier/Glorot uniform draw: `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<S: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Array2<S> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || {
        S::from_f64_lossy(rng.random_range(-bound..bound))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bound_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Array2<f64> = xavier_uniform(100, 100, 100, 100, &mut rng);
        let b = (6.0f64 / 200.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= b));
    }

    #[test]
    fn empirical_variance_matches_glorot() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Array2<f64> = xavier_uniform(256, 256, 256, 256, &mut rng);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 2.0 / 512.0;
        assert!((var - expected).abs() / expected < 0.1, "var {var} vs {expected}");
    }

    #[test]
    fn same_seed_same_weights() {
        let a: Array2<f32> = xavier_uniform(7, 5, 5, 7, &mut ChaCha8Rng::seed_from_u64(9));
        let b: Array2<f32> = xavier_uniform(7, 5, 5, 7, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
