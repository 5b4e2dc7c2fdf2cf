//! Minimal CPU neural-network layers with hand-written backward passes.
//!
//! Activations are stored channel-major as a `(C, B·P)` matrix where `P` is
//! the number of spatial positions of one sample. With this layout a
//! convolution is a single GEMM against an im2col buffer, and batch
//! normalization reduces over contiguous rows.
//!
//! Every layer is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference gradient checks.

mod conv;
mod init;
mod linear;
mod norm;
mod ops;

pub use conv::Conv3;
pub use init::xavier_uniform;
pub use linear::Linear;
pub use norm::{BatchNorm, BatchNormCache};
pub use ops::{
    interpolate_linear, relu, relu_backward, sigmoid, upsample_nearest, upsample_nearest_backward,
};

use ndarray::{Array, Array2, Dimension, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Floating point element type usable by the layers.
pub trait Scalar:
    LinalgScalar
    + Float
    + FromPrimitive
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A trainable tensor together with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<S, D: Dimension> {
    pub value: Array<S, D>,
    pub grad: Array<S, D>,
}

impl<S: Scalar, D: Dimension> Param<S, D> {
    pub fn new(value: Array<S, D>) -> Self {
        let grad = Array::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(S::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Flat mutable views of (value, grad) in memory order.
    pub fn parts_mut(&mut self) -> (&mut [S], &mut [S]) {
        (
            self.value
                .as_slice_memory_order_mut()
                .expect("parameters are contiguous"),
            self.grad
                .as_slice_memory_order_mut()
                .expect("gradients are contiguous"),
        )
    }
}

/// Visitor over named parameters: `(name, value, grad)`.
pub type ParamVisitor<'a, S> = dyn FnMut(&str, &mut [S], &mut [S]) + 'a;

/// Visitor over named non-trainable state (batch-norm running statistics).
pub type BufferVisitor<'a, S> = dyn FnMut(&str, &mut [S]) + 'a;

/// Spatial extent of one sample, always rank 3; 2D images use depth 1.
pub type Spatial = [usize; 3];

pub fn spatial_len(s: Spatial) -> usize {
    s[0] * s[1] * s[2]
}

/// A batch of multi-channel volumes in channel-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<S> {
    /// Shape `(channels, batch * positions)`; positions are C-ordered `(x, y, z)`.
    pub data: Array2<S>,
    pub batch: usize,
    pub spatial: Spatial,
}

impl<S: Scalar> FeatureMap<S> {
    pub fn zeros(channels: usize, batch: usize, spatial: Spatial) -> Self {
        Self {
            data: Array2::zeros((channels, batch * spatial_len(spatial))),
            batch,
            spatial,
        }
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn positions(&self) -> usize {
        spatial_len(self.spatial)
    }

    /// Builds a single-channel map from per-sample flattened volumes.
    pub fn from_volumes<'a, I>(volumes: I, spatial: Spatial) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
    {
        let p = spatial_len(spatial);
        let mut flat = Vec::new();
        let mut batch = 0;
        for v in volumes {
            assert_eq!(v.len(), p, "volume length does not match spatial shape");
            flat.extend_from_slice(v);
            batch += 1;
        }
        let data = Array2::from_shape_vec((1, flat.len()), flat).expect("shape checked");
        Self {
            data,
            batch,
            spatial,
        }
    }

    /// Per-sample flattening in `(C, X, Y, Z)` order: returns `(B, C·P)`.
    pub fn to_batch_major(&self) -> Array2<S> {
        let (c, p, b) = (self.channels(), self.positions(), self.batch);
        let mut out = Array2::zeros((b, c * p));
        for ch in 0..c {
            let row = self.data.row(ch);
            for s in 0..b {
                for q in 0..p {
                    out[[s, ch * p + q]] = row[s * p + q];
                }
            }
        }
        out
    }

    /// Inverse of [`FeatureMap::to_batch_major`].
    pub fn from_batch_major(flat: &Array2<S>, channels: usize, spatial: Spatial) -> Self {
        let b = flat.nrows();
        let p = spatial_len(spatial);
        assert_eq!(flat.ncols(), channels * p);
        let mut out = Self::zeros(channels, b, spatial);
        for ch in 0..channels {
            let mut row = out.data.row_mut(ch);
            for s in 0..b {
                for q in 0..p {
                    row[s * p + q] = flat[[s, ch * p + q]];
                }
            }
        }
        out
    }

    /// Values of one channel of one sample, C-ordered over space.
    pub fn sample_channel(&self, sample: usize, channel: usize) -> Vec<S> {
        let p = self.positions();
        self.data.row(channel).as_slice().expect("rows are contiguous")[sample * p..(sample + 1) * p]
            .to_vec()
    }

    pub fn cast<T: Scalar>(&self) -> FeatureMap<T> {
        FeatureMap {
            data: self.data.mapv(|v| T::from_f64_lossy(v.as_f64())),
            batch: self.batch,
            spatial: self.spatial,
        }
    }
}
