use super::{spatial_len, FeatureMap, Scalar, Spatial};
use ndarray::{Array, Dimension, Zip};

pub fn relu<S: Scalar, D: Dimension>(x: &Array<S, D>) -> Array<S, D> {
    x.mapv(|v| if v > S::zero() { v } else { S::zero() })
}

/// Gradient of ReLU given its forward output.
pub fn relu_backward<S: Scalar, D: Dimension>(out: &Array<S, D>, dy: &Array<S, D>) -> Array<S, D> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(out).for_each(|g, &o| {
        if o <= S::zero() {
            *g = S::zero();
        }
    });
    dx
}

pub fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

fn nearest_index(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (dst * src_len / dst_len).min(src_len - 1)
}

/// Nearest-neighbour resampling of every channel to `target`.
pub fn upsample_nearest<S: Scalar>(x: &FeatureMap<S>, target: Spatial) -> FeatureMap<S> {
    let src = x.spatial;
    let (pin, pout) = (spatial_len(src), spatial_len(target));
    let map = nearest_map(src, target);
    let mut y = FeatureMap::zeros(x.channels(), x.batch, target);
    for c in 0..x.channels() {
        let s = x.data.row(c);
        let s = s.as_slice().expect("contiguous");
        let mut d = y.data.row_mut(c);
        let d = d.as_slice_mut().expect("contiguous");
        for b in 0..x.batch {
            for (q, &m) in map.iter().enumerate() {
                d[b * pout + q] = s[b * pin + m];
            }
        }
    }
    y
}

/// Adjoint of [`upsample_nearest`]: sums gradients back onto source cells.
pub fn upsample_nearest_backward<S: Scalar>(dy: &FeatureMap<S>, source: Spatial) -> FeatureMap<S> {
    let (pin, pout) = (spatial_len(source), spatial_len(dy.spatial));
    let map = nearest_map(source, dy.spatial);
    let mut dx = FeatureMap::zeros(dy.channels(), dy.batch, source);
    for c in 0..dy.channels() {
        let s = dy.data.row(c);
        let s = s.as_slice().expect("contiguous");
        let mut d = dx.data.row_mut(c);
        let d = d.as_slice_mut().expect("contiguous");
        for b in 0..dy.batch {
            for (q, &m) in map.iter().enumerate() {
                d[b * pin + m] += s[b * pout + q];
            }
        }
    }
    dx
}

fn nearest_map(src: Spatial, dst: Spatial) -> Vec<usize> {
    let mut map = Vec::with_capacity(spatial_len(dst));
    for x in 0..dst[0] {
        let sx = nearest_index(x, src[0], dst[0]);
        for y in 0..dst[1] {
            let sy = nearest_index(y, src[1], dst[1]);
            for z in 0..dst[2] {
                let sz = nearest_index(z, src[2], dst[2]);
                map.push((sx * src[1] + sy) * src[2] + sz);
            }
        }
    }
    map
}

/// Separable linear interpolation (bilinear / trilinear) with half-pixel
/// centres and edge clamping, resampling a C-ordered grid from `src` to `dst`.
pub fn interpolate_linear(values: &[f64], src: Spatial, dst: Spatial) -> Vec<f64> {
    assert_eq!(values.len(), spatial_len(src));
    let weights = |axis: usize| -> Vec<(usize, usize, f64)> {
        (0..dst[axis])
            .map(|o| {
                let scale = src[axis] as f64 / dst[axis] as f64;
                let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src[axis] - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src[axis] - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let (wx, wy, wz) = (weights(0), weights(1), weights(2));
    let at = |x: usize, y: usize, z: usize| values[(x * src[1] + y) * src[2] + z];
    let mut out = Vec::with_capacity(spatial_len(dst));
    for &(x0, x1, fx) in &wx {
        for &(y0, y1, fy) in &wy {
            for &(z0, z1, fz) in &wz {
                let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
                let c00 = lerp(at(x0, y0, z0), at(x0, y0, z1), fz);
                let c01 = lerp(at(x0, y1, z0), at(x0, y1, z1), fz);
                let c10 = lerp(at(x1, y0, z0), at(x1, y0, z1), fz);
                let c11 = lerp(at(x1, y1, z0), at(x1, y1, z1), fz);
                out.push(lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fx));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_doubles_each_cell() {
        let x = FeatureMap::<f64>::from_volumes([&[1.0, 2.0, 3.0, 4.0][..]], [2, 2, 1]);
        let y = upsample_nearest(&x, [4, 4, 1]);
        assert_eq!(y.sample_channel(0, 0)[..4], [1.0, 1.0, 2.0, 2.0]);
        assert_eq!(y.sample_channel(0, 0)[12..], [3.0, 3.0, 4.0, 4.0]);
        let back = upsample_nearest_backward(&y, [2, 2, 1]);
        assert_eq!(back.sample_channel(0, 0), vec![4.0, 8.0, 12.0, 16.0]);
    }

    #[test]
    fn linear_interpolation_preserves_constants_and_range() {
        let v = vec![0.25; 16];
        let up = interpolate_linear(&v, [4, 4, 1], [16, 16, 1]);
        assert!(up.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let ramp: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let up = interpolate_linear(&ramp, [2, 2, 2], [5, 5, 5]);
        assert!(up.iter().all(|&x| (0.0..=7.0).contains(&x)));
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
    }
}
