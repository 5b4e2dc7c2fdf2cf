//! Reconstruction fidelity: kernel MMD between sample sets and normalized
//! joint-histogram MI between images.

use super::info::{discretize_fixed, entropy, mutual_information};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};

pub const DEFAULT_IMAGE_BINS: usize = 32;

/// Median of all pairwise Euclidean distances within the pooled sample.
pub fn median_pairwise_distance(pooled: &Array2<f64>) -> f64 {
    let sq = squared_distances(pooled, pooled);
    let n = pooled.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq[[i, j]].sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = d[mid];
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

fn squared_distances(x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let nx: Array1<f64> = x.map_axis(Axis(1), |r| r.dot(&r));
    let ny: Array1<f64> = y.map_axis(Axis(1), |r| r.dot(&r));
    let mut g = x.dot(&y.t()) * -2.0;
    g += &nx.insert_axis(Axis(1));
    g += &ny.insert_axis(Axis(0));
    g.mapv_inplace(|v| v.max(0.0));
    g
}

fn mean_kernel(x: &Array2<f64>, y: &Array2<f64>, gamma: f64) -> f64 {
    squared_distances(x, y).mapv(|d| (-gamma * d).exp()).mean().unwrap_or(0.0)
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel whose bandwidth is
/// the median pairwise distance of `X ∪ Y` (1.0 if that median is zero).
/// Rows are samples.
pub fn mmd(x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if x.nrows() < 2 || y.nrows() < 2 {
        return Err(Error::InvalidArgument("MMD needs at least two samples per set".into()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch {
            expected: vec![x.ncols()],
            actual: vec![y.ncols()],
        });
    }
    let pooled = ndarray::concatenate(Axis(0), &[x.view(), y.view()]).expect("same width");
    let mut sigma = median_pairwise_distance(&pooled);
    if sigma <= 0.0 {
        sigma = 1.0;
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let v = mean_kernel(x, x, gamma) + mean_kernel(y, y, gamma) - 2.0 * mean_kernel(x, y, gamma);
    Ok(v.max(0.0))
}

/// Normalized MI `I / sqrt(H(x)·H(y))` of intensities binned over `[0, 1]`.
/// Zero when either image is constant.
pub fn image_mi(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![x.len()],
            actual: vec![y.len()],
        });
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins must be >= 2, got {bins}")));
    }
    let bx = discretize_fixed(x, bins, 0.0, 1.0);
    let by = discretize_fixed(y, bins, 0.0, 1.0);
    let (hx, hy) = (entropy(&bx, bins), entropy(&by, bins));
    if hx <= 0.0 || hy <= 0.0 {
        return Ok(0.0);
    }
    Ok((mutual_information(&bx, &by, bins, bins) / (hx * hy).sqrt()).clamp(0.0, 1.0))
}
