//! Recursive feature elimination with an L2-regularized linear SVM.
//!
//! The classifier minimizes `½‖w‖² + C Σ max(0, 1 − yᵢ(w·xᵢ + b))²`
//! (squared hinge, unregularized bias) by primal Newton iterations on the
//! active set.

use super::Dataset;
use crate::error::{Error, Result};
use ndarray::{s, Array1, Array2, Axis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfeOptions {
    /// Inverse regularization strength.
    pub c: f64,
    pub max_newton_iters: usize,
}

impl Default for RfeOptions {
    fn default() -> Self {
        Self {
            c: 10.0,
            max_newton_iters: 50,
        }
    }
}

/// Keeps the `n_keep` most discriminative attributes, ordered from most to
/// least important (reverse of the order they would be eliminated).
pub fn rfe_select(dataset: &Dataset, n_keep: usize, options: RfeOptions) -> Result<Vec<String>> {
    let names = dataset.attribute_names();
    if n_keep == 0 || n_keep > names.len() {
        return Err(Error::InvalidArgument(format!(
            "n_keep must be in 1..={}, got {n_keep}",
            names.len()
        )));
    }
    let (zeros, ones) = dataset.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::SingleClass);
    }
    let x = standardize(&dataset.attribute_matrix());
    let y: Array1<f64> = dataset
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let mut remaining: Vec<usize> = (0..names.len()).collect();
    loop {
        let sub = x.select(Axis(1), &remaining);
        let (w, _) = fit_linear_svm(&sub, &y, options);
        if remaining.len() == n_keep {
            let mut order: Vec<usize> = (0..remaining.len()).collect();
            order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
            return Ok(order.iter().map(|&i| names[remaining[i]].clone()).collect());
        }
        let weakest = (0..remaining.len())
            .min_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()).then(b.cmp(&a)))
            .expect("non-empty");
        remaining.remove(weakest);
    }
}

/// Zero mean, unit variance columns; constant columns become zero.
fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut col in out.columns_mut() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let sd = (col.mapv(|v| (v - mean).powi(2)).sum() / n).sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    out
}

fn objective(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>, b: f64, c: f64) -> f64 {
    let margins = x.dot(w) + b;
    let hinge: f64 = margins
        .iter()
        .zip(y)
        .map(|(m, yi)| (1.0 - yi * m).max(0.0).powi(2))
        .sum();
    0.5 * w.dot(w) + c * hinge
}

/// Returns `(w, b)`.
pub(crate) fn fit_linear_svm(x: &Array2<f64>, y: &Array1<f64>, options: RfeOptions) -> (Array1<f64>, f64) {
    let (n, k) = x.dim();
    let c = options.c;
    let mut xa = Array2::ones((n, k + 1));
    xa.slice_mut(s![.., ..k]).assign(x);
    let mut theta = Array1::<f64>::zeros(k + 1);
    let obj = |t: &Array1<f64>| objective(x, y, &t.slice(s![..k]).to_owned(), t[k], c);
    for _ in 0..options.max_newton_iters {
        let margins = xa.dot(&theta);
        let active: Vec<usize> = (0..n).filter(|&i| y[i] * margins[i] < 1.0).collect();
        // Gradient and generalized Hessian of the objective.
        let mut grad = theta.clone();
        grad[k] = 0.0;
        let mut hess = Array2::<f64>::eye(k + 1);
        hess[[k, k]] = 1e-9;
        for &i in &active {
            let row = xa.row(i);
            let r = y[i] * margins[i] - 1.0;
            grad.scaled_add(2.0 * c * r * y[i], &row);
            for p in 0..=k {
                for q in 0..=k {
                    hess[[p, q]] += 2.0 * c * row[p] * row[q];
                }
            }
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-10 {
            break;
        }
        let Some(step) = solve(&hess, &grad) else { break };
        let current = obj(&theta);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let cand = &theta - &(&step * t);
            if obj(&cand) <= current - 1e-4 * t * grad.dot(&step) {
                theta = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (theta.slice(s![..k]).to_owned(), theta[k])
}

/// Gaussian elimination with partial pivoting.
fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let mut m = a.clone();
    let mut v = b.clone();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))?;
        if m[[pivot, col]].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap([pivot, j], [col, j]);
            }
            v.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            for j in col..n {
                m[[row, j]] -= f * m[[col, j]];
            }
            v[row] -= f * v[col];
        }
    }
    let mut out = Array1::zeros(n);
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|j| m[[row, j]] * out[j]).sum();
        out[row] = (v[row] - tail) / m[[row, row]];
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Sample, Volume};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_with_informative_a0(n: usize, k: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut attributes = vec![label as f64];
                attributes.extend((1..k).map(|_| rng.random_range(-1.0..1.0)));
                Sample { id: format!("s{i}"), volume: Volume::zeros([1, 1, 1]), attributes, label }
            })
            .collect();
        let names = (0..k).map(|j| format!("a{j}")).collect();
        Dataset::new(samples, names, [1, 1, 1]).unwrap()
    }

    /// Training accuracy of the best threshold on a single feature.
    fn single_feature_accuracy(d: &Dataset, j: usize) -> f64 {
        let a = d.attribute_matrix();
        let labels = d.labels();
        let mut best: f64 = 0.0;
        for t in a.column(j).iter() {
            for sign in [1.0, -1.0] {
                let correct = (0..d.len())
                    .filter(|&i| (sign * (a[[i, j]] - t) >= 0.0) == (labels[i] == 1))
                    .count();
                best = best.max(correct as f64 / d.len() as f64);
            }
        }
        best
    }

    #[test]
    fn label_copy_survives() {
        let d = dataset_with_informative_a0(80, 6, 5);
        let best = (0..6)
            .max_by(|&p, &q| single_feature_accuracy(&d, p).total_cmp(&single_feature_accuracy(&d, q)))
            .unwrap();
        assert_eq!(best, 0);
        assert_eq!(rfe_select(&d, 1, RfeOptions::default()).unwrap(), vec!["a0".to_string()]);
    }

    #[test]
    fn keep_all_returns_every_attribute() {
        let d = dataset_with_informative_a0(40, 4, 1);
        let mut got = rfe_select(&d, 4, RfeOptions::default()).unwrap();
        assert_eq!(got[0], "a0");
        got.sort();
        assert_eq!(got, vec!["a0", "a1", "a2", "a3"]);
    }

    #[test]
    fn default_regularization_is_ten() {
        assert_eq!(RfeOptions::default().c, 10.0);
    }

    #[test]
    fn single_class_rejected() {
        let samples = (0..4)
            .map(|i| Sample { id: i.to_string(), volume: Volume::zeros([1, 1, 1]), attributes: vec![i as f64], label: 1 })
            .collect();
        let d = Dataset::new(samples, vec!["a".into()], [1, 1, 1]).unwrap();
        assert!(matches!(rfe_select(&d, 1, RfeOptions::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn newton_solution_is_stationary() {
        let d = dataset_with_informative_a0(60, 3, 8);
        let x = standardize(&d.attribute_matrix());
        let y: Array1<f64> = d.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let (w, b) = fit_linear_svm(&x, &y, RfeOptions::default());
        let base = objective(&x, &y, &w, b, 10.0);
        for j in 0..3 {
            for h in [1e-4, -1e-4] {
                let mut wp = w.clone();
                wp[j] += h;
                assert!(objective(&x, &y, &wp, b, 10.0) >= base - 1e-9);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn output_is_duplicate_free_subset(seed in 0u64..50, keep in 1usize..5) {
            let d = dataset_with_informative_a0(30, 5, seed);
            let out = rfe_select(&d, keep, RfeOptions::default()).unwrap();
            proptest::prop_assert_eq!(out.len(), keep);
            let set: std::collections::HashSet<_> = out.iter().collect();
            proptest::prop_assert_eq!(set.len(), keep);
            proptest::prop_assert!(out.iter().all(|n| d.attribute_names().contains(n)));
        }
    }
}
