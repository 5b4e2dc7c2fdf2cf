use super::{BufferVisitor, FeatureMap, Param, ParamVisitor, Scalar};
use ndarray::{Array1, Array2, Axis, Ix1};

/// Per-channel batch normalization with running statistics for evaluation.
#[derive(Debug, Clone)]
pub struct BatchNorm<S> {
    pub gamma: Param<S, Ix1>,
    pub beta: Param<S, Ix1>,
    pub running_mean: Array1<S>,
    pub running_var: Array1<S>,
    pub momentum: f64,
    pub eps: f64,
}

/// Intermediates retained from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<S> {
    xhat: Array2<S>,
    inv_std: Array1<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Array1::ones(channels)),
            beta: Param::new(Array1::zeros(channels)),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// Normalizes with batch statistics and folds them into the running estimates.
    pub fn forward_train(&mut self, x: &FeatureMap<S>) -> (FeatureMap<S>, BatchNormCache<S>) {
        let (y, cache, mean, var) = self.forward_batch_stats(x);
        let m = S::from_f64_lossy(self.momentum);
        let n = x.data.ncols();
        let unbias = if n > 1 {
            S::from_f64_lossy(n as f64 / (n - 1) as f64)
        } else {
            S::one()
        };
        self.running_mean = &self.running_mean * (S::one() - m) + &(mean * m);
        self.running_var = &self.running_var * (S::one() - m) + &(var * (m * unbias));
        (y, cache)
    }

    /// Training-mode normalization without touching running statistics.
    pub fn forward_batch_stats(
        &self,
        x: &FeatureMap<S>,
    ) -> (FeatureMap<S>, BatchNormCache<S>, Array1<S>, Array1<S>) {
        let n = S::from_usize(x.data.ncols()).expect("count fits");
        let mean = x.data.sum_axis(Axis(1)) / n;
        let centered = &x.data - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let eps = S::from_f64_lossy(self.eps);
        let inv_std = var.mapv(|v| S::one() / (v + eps).sqrt());
        let xhat = centered * &inv_std.view().insert_axis(Axis(1));
        let data = &xhat * &self.gamma.value.view().insert_axis(Axis(1))
            + &self.beta.value.view().insert_axis(Axis(1));
        let y = FeatureMap {
            data,
            batch: x.batch,
            spatial: x.spatial,
        };
        (y, BatchNormCache { xhat, inv_std }, mean, var)
    }

    pub fn forward_eval(&self, x: &FeatureMap<S>) -> FeatureMap<S> {
        let eps = S::from_f64_lossy(self.eps);
        let scale = &self.gamma.value / &self.running_var.mapv(|v| (v + eps).sqrt());
        let shift = &self.beta.value - &(&self.running_mean * &scale);
        let data = &x.data * &scale.view().insert_axis(Axis(1)) + &shift.view().insert_axis(Axis(1));
        FeatureMap {
            data,
            batch: x.batch,
            spatial: x.spatial,
        }
    }

    pub fn backward(&mut self, cache: &BatchNormCache<S>, dy: &FeatureMap<S>) -> FeatureMap<S> {
        let n = S::from_usize(dy.data.ncols()).expect("count fits");
        let dgamma = (&dy.data * &cache.xhat).sum_axis(Axis(1));
        let dbeta = dy.data.sum_axis(Axis(1));
        // dx = gamma·inv_std/N · (N·dy − Σdy − xhat·Σ(dy·xhat))
        let coef = &self.gamma.value * &cache.inv_std / n;
        let inner = &dy.data * n
            - &dbeta.view().insert_axis(Axis(1))
            - &(&cache.xhat * &dgamma.view().insert_axis(Axis(1)));
        let data = inner * &coef.view().insert_axis(Axis(1));
        self.gamma.grad += &dgamma;
        self.beta.grad += &dbeta;
        FeatureMap {
            data,
            batch: dy.batch,
            spatial: dy.spatial,
        }
    }

    pub fn zero_grad(&mut self) {
        self.gamma.zero_grad();
        self.beta.zero_grad();
    }

    pub fn visit(&mut self, prefix: &str, f: &mut ParamVisitor<'_, S>) {
        let (v, g) = self.gamma.parts_mut();
        f(&format!("{prefix}.gamma"), v, g);
        let (v, g) = self.beta.parts_mut();
        f(&format!("{prefix}.beta"), v, g);
    }

    pub fn visit_buffers(&mut self, prefix: &str, f: &mut BufferVisitor<'_, S>) {
        f(
            &format!("{prefix}.running_mean"),
            self.running_mean.as_slice_mut().expect("contiguous"),
        );
        f(
            &format!("{prefix}.running_var"),
            self.running_var.as_slice_mut().expect("contiguous"),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_map() -> FeatureMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = FeatureMap::zeros(3, 2, [3, 2, 1]);
        x.data.mapv_inplace(|_| rng.random_range(-2.0..2.0));
        x
    }

    #[test]
    fn normalized_rows_have_zero_mean_unit_variance() {
        let mut bn = BatchNorm::<f64>::new(3);
        let (y, _) = bn.forward_train(&sample_map());
        for row in y.data.rows() {
            let m = row.mean().unwrap();
            let v = row.mapv(|x| (x - m).powi(2)).mean().unwrap();
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut bn = BatchNorm::<f64>::new(3);
        bn.gamma.value = Array1::from(vec![1.5, 0.7, -0.4]);
        bn.beta.value = Array1::from(vec![0.1, 0.2, 0.3]);
        let x = sample_map();
        let coef = Array2::from_shape_fn(x.data.raw_dim(), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let loss = |b: &BatchNorm<f64>, x: &FeatureMap<f64>| (&b.forward_batch_stats(x).0.data * &coef).sum();
        let (_, cache, _, _) = bn.forward_batch_stats(&x);
        let dy = FeatureMap { data: coef.clone(), batch: x.batch, spatial: x.spatial };
        let dx = bn.backward(&cache, &dy);
        let h = 1e-6;
        for idx in [(0, 0), (1, 5), (2, 11)] {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let fd = (loss(&bn, &xp) - loss(&bn, &xm)) / (2.0 * h);
            assert!((fd - dx.data[idx]).abs() < 1e-6, "{fd} vs {}", dx.data[idx]);
        }
        let mut p = bn.clone();
        p.gamma.value[2] += h;
        let up = loss(&p, &x);
        p.gamma.value[2] -= 2.0 * h;
        let fd = (up - loss(&p, &x)) / (2.0 * h);
        assert!((fd - bn.gamma.grad[2]).abs() < 1e-6);
    }

    #[test]
    fn eval_uses_running_stats() {
        let mut bn = BatchNorm::<f64>::new(1);
        bn.running_mean = Array1::from(vec![2.0]);
        bn.running_var = Array1::from(vec![4.0 - 1e-5]);
        let x = FeatureMap { data: Array2::from_elem((1, 1), 4.0), batch: 1, spatial: [1, 1, 1] };
        let y = bn.forward_eval(&x);
        assert!((y.data[[0, 0]] - 1.0).abs() < 1e-12);
    }
}
