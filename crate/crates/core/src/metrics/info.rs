//! Histogram entropy and mutual-information based scores.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView1};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const DEFAULT_BINS: usize = 20;

/// Significance level below which an MI estimate is kept. Estimates that a
/// G-test cannot distinguish from independence are reported as zero.
pub const MI_SIGNIFICANCE: f64 = 1e-3;

/// Equal-width bin index of every value over the observed range. A constant
/// column maps entirely to bin 0.
pub fn discretize(values: ArrayView1<f64>, bins: usize) -> Vec<usize> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Discretizes into `bins` equal-width bins over a fixed `[lo, hi]` range.
pub fn discretize_fixed(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<usize> {
    let width = hi - lo;
    values
        .iter()
        .map(|&v| (((v - lo) / width * bins as f64).max(0.0) as usize).min(bins - 1))
        .collect()
}

fn entropy_of_counts(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in entropy (nats) of a discretized variable.
pub fn entropy(codes: &[usize], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &c in codes {
        counts[c] += 1;
    }
    entropy_of_counts(counts.into_iter(), codes.len() as f64)
}

/// Binned entropy of a real column.
pub fn binned_entropy(values: ArrayView1<f64>, bins: usize) -> f64 {
    entropy(&discretize(values, bins), bins)
}

/// Plug-in MI (nats) with the degrees of freedom of its independence test.
fn mutual_information_df(x: &[usize], y: &[usize], bins_x: usize, bins_y: usize) -> (f64, usize) {
    let n = x.len() as f64;
    let mut joint = vec![0usize; bins_x * bins_y];
    let mut mx = vec![0usize; bins_x];
    let mut my = vec![0usize; bins_y];
    for (&a, &b) in x.iter().zip(y) {
        joint[a * bins_y + b] += 1;
        mx[a] += 1;
        my[b] += 1;
    }
    let hx = entropy_of_counts(mx.iter().copied(), n);
    let hy = entropy_of_counts(my.iter().copied(), n);
    let hxy = entropy_of_counts(joint.into_iter(), n);
    let occupied = |m: &[usize]| m.iter().filter(|&&c| c > 0).count();
    let df = occupied(&mx).saturating_sub(1) * occupied(&my).saturating_sub(1);
    ((hx + hy - hxy).max(0.0), df)
}

/// Plug-in mutual information (nats) between two discretized variables.
pub fn mutual_information(x: &[usize], y: &[usize], bins_x: usize, bins_y: usize) -> f64 {
    mutual_information_df(x, y, bins_x, bins_y).0
}

/// MI with estimates not significant under a G-test (`2n·MI ~ χ²(df)`) set to 0.
fn filtered_mi(x: &[usize], y: &[usize], bins: usize, alpha: Option<f64>) -> f64 {
    let (mi, df) = mutual_information_df(x, y, bins, bins);
    if df == 0 {
        return 0.0;
    }
    match alpha {
        Some(alpha) => {
            let chi = ChiSquared::new(df as f64).expect("positive df");
            let critical = chi.inverse_cdf(1.0 - alpha) / (2.0 * x.len() as f64);
            if mi > critical {
                mi
            } else {
                0.0
            }
        }
        None => mi,
    }
}

fn mi_matrix_with(z: &Array2<f64>, a: &Array2<f64>, bins: usize, alpha: Option<f64>) -> Result<Array2<f64>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bins must be >= 2, got {bins}")));
    }
    if z.nrows() != a.nrows() {
        return Err(Error::ShapeMismatch {
            expected: vec![z.nrows()],
            actual: vec![a.nrows()],
        });
    }
    let zc: Vec<Vec<usize>> = z.columns().into_iter().map(|c| discretize(c, bins)).collect();
    let ac: Vec<Vec<usize>> = a.columns().into_iter().map(|c| discretize(c, bins)).collect();
    Ok(Array2::from_shape_fn((z.ncols(), a.ncols()), |(d, k)| {
        filtered_mi(&zc[d], &ac[k], bins, alpha)
    }))
}

/// `D × K` matrix of histogram MI between latent columns and attributes.
///
/// Entries indistinguishable from independence at [`MI_SIGNIFICANCE`] are 0.
pub fn mi_matrix(z: &Array2<f64>, a: &Array2<f64>, bins: usize) -> Result<Array2<f64>> {
    mi_matrix_with(z, a, bins, Some(MI_SIGNIFICANCE))
}

/// Unfiltered plug-in MI matrix.
pub fn mi_matrix_raw(z: &Array2<f64>, a: &Array2<f64>, bins: usize) -> Result<Array2<f64>> {
    mi_matrix_with(z, a, bins, None)
}

/// Mean per-dimension modularity of an MI matrix (rows: latent dims).
pub fn modularity(mi: &Array2<f64>) -> Result<f64> {
    let k = mi.ncols();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("modularity needs K >= 2 attributes, got {k}")));
    }
    if mi.nrows() == 0 {
        return Err(Error::InvalidArgument("modularity needs at least one latent dimension".into()));
    }
    let scores = mi.rows().into_iter().map(|row| {
        let (best, theta) = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if theta <= 0.0 {
            return 1.0;
        }
        let spread: f64 = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(_, &v)| v * v)
            .sum();
        1.0 - spread / (theta * theta * (k - 1) as f64)
    });
    Ok(scores.sum::<f64>() / mi.nrows() as f64)
}

/// Per-attribute normalized gap between the two most informative dimensions.
/// Attributes with zero binned entropy are skipped.
pub fn mig_per_attribute(z: &Array2<f64>, a: &Array2<f64>, bins: usize) -> Result<Vec<Option<f64>>> {
    if z.ncols() < 2 {
        return Err(Error::InvalidArgument("MIG needs at least two latent dimensions".into()));
    }
    let mi = mi_matrix(z, a, bins)?;
    Ok(a
        .columns()
        .into_iter()
        .enumerate()
        .map(|(k, col)| {
            let h = binned_entropy(col, bins);
            if h <= 0.0 {
                return None;
            }
            let mut m: Vec<f64> = mi.column(k).to_vec();
            m.sort_by(|x, y| y.total_cmp(x));
            Some(((m[0] - m[1]) / h).clamp(0.0, 1.0))
        })
        .collect())
}

pub fn mig(z: &Array2<f64>, a: &Array2<f64>, bins: usize) -> Result<f64> {
    let per = mig_per_attribute(z, a, bins)?;
    let valid: Vec<f64> = per.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::InvalidArgument("MIG undefined: every attribute is constant".into()));
    }
    Ok(valid.iter().sum::<f64>() / valid.len() as f64)
}
