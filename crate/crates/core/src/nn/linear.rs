use super::{xavier_uniform, Param, ParamVisitor, Scalar};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Ix1, Ix2};
use rand::Rng;

/// Fully connected layer `y = x Wᵀ + b` over a `(batch, features)` matrix.
#[derive(Debug, Clone)]
pub struct Linear<S> {
    pub weight: Param<S, Ix2>,
    pub bias: Param<S, Ix1>,
}

impl<S: Scalar> Linear<S> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(xavier_uniform(outputs, inputs, inputs, outputs, rng)),
            bias: Param::new(Array1::zeros(outputs)),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn forward(&self, x: &Array2<S>) -> Array2<S> {
        let mut y = Array2::zeros((x.nrows(), self.outputs()));
        general_mat_mul(S::one(), x, &self.weight.value.t(), S::zero(), &mut y);
        y += &self.bias.value;
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &Array2<S>, dy: &Array2<S>) -> Array2<S> {
        general_mat_mul(S::one(), &dy.t(), x, S::one(), &mut self.weight.grad);
        self.bias.grad += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.value)
    }

    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        self.bias.zero_grad();
    }

    pub fn visit(&mut self, prefix: &str, f: &mut ParamVisitor<'_, S>) {
        let (v, g) = self.weight.parts_mut();
        f(&format!("{prefix}.weight"), v, g);
        let (v, g) = self.bias.parts_mut();
        f(&format!("{prefix}.bias"), v, g);
    }
}
