use super::{spatial_len, xavier_uniform, FeatureMap, Param, ParamVisitor, Scalar, Spatial};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Ix1, Ix2};
use rand::Rng;

/// Convolution with a 3-wide kernel along every axis of extent > 1.
///
/// Axes of extent 1 get a 1-wide kernel, stride 1 and no padding, so a 2D
/// image stored as `(X, Y, 1)` runs an ordinary 3×3 convolution.
#[derive(Debug, Clone)]
pub struct Conv3<S> {
    /// `(out_channels, in_channels · kernel volume)`.
    pub weight: Param<S, Ix2>,
    pub bias: Param<S, Ix1>,
    in_channels: usize,
    kernel: Spatial,
    stride: Spatial,
    pad: Spatial,
    input: Spatial,
    output: Spatial,
    gather: Vec<u32>,
}

impl<S: Scalar> Conv3<S> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        input: Spatial,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let mut kernel = [1; 3];
        let mut strides = [1; 3];
        let mut pad = [0; 3];
        let mut output = [1; 3];
        for a in 0..3 {
            if input[a] > 1 {
                kernel[a] = 3;
                strides[a] = stride;
                pad[a] = 1;
            }
            output[a] = (input[a] + 2 * pad[a] - kernel[a]) / strides[a] + 1;
        }
        let kvol = spatial_len(kernel);
        let fan_in = in_channels * kvol;
        let fan_out = out_channels * kvol;
        Self {
            weight: Param::new(xavier_uniform(out_channels, fan_in, fan_in, fan_out, rng)),
            bias: Param::new(Array1::zeros(out_channels)),
            in_channels,
            kernel,
            stride: strides,
            pad,
            input,
            output,
            gather: Self::build_gather(kernel, strides, pad, input, output),
        }
    }

    pub fn input_spatial(&self) -> Spatial {
        self.input
    }

    pub fn output_spatial(&self) -> Spatial {
        self.output
    }

    pub fn stride(&self) -> Spatial {
        self.stride
    }

    pub fn padding(&self) -> Spatial {
        self.pad
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// Forward pass; also returns the im2col buffer needed by [`Conv3::backward`].
    pub fn forward_with_cols(&self, x: &FeatureMap<S>) -> (FeatureMap<S>, Array2<S>) {
        assert_eq!(x.spatial, self.input, "conv input spatial mismatch");
        assert_eq!(x.channels(), self.in_channels, "conv input channel mismatch");
        let cols = self.im2col(x);
        let mut y = FeatureMap::zeros(self.out_channels(), x.batch, self.output);
        general_mat_mul(S::one(), &self.weight.value, &cols, S::zero(), &mut y.data);
        y.data += &self.bias.value.view().insert_axis(Axis(1));
        (y, cols)
    }

    pub fn forward(&self, x: &FeatureMap<S>) -> FeatureMap<S> {
        self.forward_with_cols(x).0
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, cols: &Array2<S>, dy: &FeatureMap<S>) -> FeatureMap<S> {
        general_mat_mul(S::one(), &dy.data, &cols.t(), S::one(), &mut self.weight.grad);
        self.bias.grad += &dy.data.sum_axis(Axis(1));
        let mut dcols = Array2::zeros(cols.raw_dim());
        general_mat_mul(S::one(), &self.weight.value.t(), &dy.data, S::zero(), &mut dcols);
        self.col2im(&dcols, dy.batch)
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

    /// Source position of every `(tap, output position)` pair, `(kvol, pout)`
    /// row-major; padding maps to `pin`, an extra always-zero slot.
    fn build_gather(kernel: Spatial, stride: Spatial, pad: Spatial, input: Spatial, output: Spatial) -> Vec<u32> {
        let pin = spatial_len(input) as u32;
        let mut table = Vec::with_capacity(spatial_len(kernel) * spatial_len(output));
        let src = |axis: usize, o: usize, k: usize| {
            let i = (o * stride[axis] + k) as isize - pad[axis] as isize;
            (i >= 0 && (i as usize) < input[axis]).then_some(i as usize)
        };
        for kx in 0..kernel[0] {
            for ky in 0..kernel[1] {
                for kz in 0..kernel[2] {
                    for px in 0..output[0] {
                        for py in 0..output[1] {
                            for pz in 0..output[2] {
                                table.push(match (src(0, px, kx), src(1, py, ky), src(2, pz, kz)) {
                                    (Some(x), Some(y), Some(z)) => ((x * input[1] + y) * input[2] + z) as u32,
                                    _ => pin,
                                });
                            }
                        }
                    }
                }
            }
        }
        table
    }

    fn im2col(&self, x: &FeatureMap<S>) -> Array2<S> {
        let kvol = spatial_len(self.kernel);
        let pin = spatial_len(self.input);
        let pout = spatial_len(self.output);
        let mut data = Vec::with_capacity(self.in_channels * kvol * x.batch * pout);
        let mut padded = vec![S::zero(); x.batch * (pin + 1)];
        for c in 0..self.in_channels {
            let src = x.data.row(c);
            let src = src.as_slice().expect("contiguous rows");
            for (b, dst) in padded.chunks_exact_mut(pin + 1).enumerate() {
                dst[..pin].copy_from_slice(&src[b * pin..(b + 1) * pin]);
            }
            for idx in self.gather.chunks_exact(pout) {
                for sample in padded.chunks_exact(pin + 1) {
                    data.extend(idx.iter().map(|&i| sample[i as usize]));
                }
            }
        }
        Array2::from_shape_vec((self.in_channels * kvol, x.batch * pout), data).expect("sizes match")
    }

    fn col2im(&self, dcols: &Array2<S>, batch: usize) -> FeatureMap<S> {
        let kvol = spatial_len(self.kernel);
        let pin = spatial_len(self.input);
        let pout = spatial_len(self.output);
        let mut dx = FeatureMap::zeros(self.in_channels, batch, self.input);
        let mut acc = vec![S::zero(); pin + 1];
        for c in 0..self.in_channels {
            let mut dst_row = dx.data.row_mut(c);
            let dst = dst_row.as_slice_mut().expect("contiguous rows");
            for b in 0..batch {
                acc.iter_mut().for_each(|v| *v = S::zero());
                for t in 0..kvol {
                    let idx = &self.gather[t * pout..(t + 1) * pout];
                    let row = dcols.row(c * kvol + t);
                    let grad = &row.as_slice().expect("contiguous rows")[b * pout..(b + 1) * pout];
                    for (&g, &i) in grad.iter().zip(idx) {
                        acc[i as usize] += g;
                    }
                }
                dst[b * pin..(b + 1) * pin].copy_from_slice(&acc[..pin]);
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct nested-loop convolution used as an independent reference.
    fn naive(conv: &Conv3<f64>, x: &FeatureMap<f64>) -> FeatureMap<f64> {
        let mut y = FeatureMap::zeros(conv.out_channels(), x.batch, conv.output);
        let [ix, iy, iz] = conv.input;
        let [ox, oy, oz] = conv.output;
        for b in 0..x.batch {
            for o in 0..conv.out_channels() {
                for px in 0..ox {
                    for py in 0..oy {
                        for pz in 0..oz {
                            let mut acc = conv.bias.value[o];
                            for c in 0..conv.in_channels {
                                for kx in 0..conv.kernel[0] {
                                    for ky in 0..conv.kernel[1] {
                                        for kz in 0..conv.kernel[2] {
                                            let sx = (px * conv.stride[0] + kx) as isize - conv.pad[0] as isize;
                                            let sy = (py * conv.stride[1] + ky) as isize - conv.pad[1] as isize;
                                            let sz = (pz * conv.stride[2] + kz) as isize - conv.pad[2] as isize;
                                            if sx < 0 || sy < 0 || sz < 0 {
                                                continue;
                                            }
                                            let (sx, sy, sz) = (sx as usize, sy as usize, sz as usize);
                                            if sx >= ix || sy >= iy || sz >= iz {
                                                continue;
                                            }
                                            let w = conv.weight.value[[
                                                o,
                                                c * spatial_len(conv.kernel)
                                                    + (kx * conv.kernel[1] + ky) * conv.kernel[2]
                                                    + kz,
                                            ]];
                                            acc += w * x.data[[c, b * ix * iy * iz + (sx * iy + sy) * iz + sz]];
                                        }
                                    }
                                }
                            }
                            y.data[[o, b * ox * oy * oz + (px * oy + py) * oz + pz]] = acc;
                        }
                    }
                }
            }
        }
        y
    }

    fn random_map(c: usize, b: usize, s: Spatial, seed: u64) -> FeatureMap<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FeatureMap::zeros(c, b, s);
        m.data.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        m
    }

    #[test]
    fn matches_naive_2d_and_3d() {
        for (spatial, stride) in [([7, 6, 1], 2), ([5, 5, 5], 2), ([4, 4, 1], 1), ([3, 4, 5], 1)] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut conv = Conv3::<f64>::new(2, 3, spatial, stride, &mut rng);
            conv.bias.value = Array1::from(vec![0.1, -0.3, 0.2]);
            let x = random_map(2, 2, spatial, 5);
            let fast = conv.forward(&x);
            let slow = naive(&conv, &x);
            assert_eq!(fast.spatial, slow.spatial);
            for (a, b) in fast.data.iter().zip(slow.data.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_extents() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Conv3::<f32>::new(1, 4, [64, 64, 1], 2, &mut rng);
        assert_eq!(c.output_spatial(), [32, 32, 1]);
        let c = Conv3::<f32>::new(1, 4, [32, 32, 32], 2, &mut rng);
        assert_eq!(c.output_spatial(), [16, 16, 16]);
        let c = Conv3::<f32>::new(1, 4, [4, 4, 1], 1, &mut rng);
        assert_eq!(c.output_spatial(), [4, 4, 1]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let spatial = [5, 4, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut conv = Conv3::<f64>::new(2, 2, spatial, 2, &mut rng);
        let x = random_map(2, 2, spatial, 8);
        let (y, cols) = conv.forward_with_cols(&x);
        let coef = random_map(2, 2, y.spatial, 9);
        let loss = |c: &Conv3<f64>, x: &FeatureMap<f64>| (&c.forward(x).data * &coef.data).sum();
        let dx = conv.backward(&cols, &coef);
        let h = 1e-6;
        for idx in [(0, 0), (1, 17), (0, 59), (1, 100)] {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let fd = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * h);
            assert!((fd - dx.data[idx]).abs() < 1e-7, "dx{idx:?}: {fd} vs {}", dx.data[idx]);
        }
        for idx in [(0, 0), (1, 13), (0, 53)] {
            let mut p = conv.clone();
            p.weight.value[idx] += h;
            let up = loss(&p, &x);
            p.weight.value[idx] -= 2.0 * h;
            let down = loss(&p, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - conv.weight.grad[idx]).abs() < 1e-7);
        }
    }
}
