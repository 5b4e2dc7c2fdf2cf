use super::Volume;
use crate::nn::Spatial;

/// Center-crops to `target`, min–max scales to `[0, 1]`, then zero-pads.
///
/// Scaling happens after cropping so the output always attains 0 and 1
/// (unless constant), which makes the operation idempotent. A constant
/// volume maps to all zeros.
pub fn preprocess(volume: &Volume, target: Spatial) -> Volume {
    let src = volume.shape;
    // Per axis: (source start, destination start, copied length).
    let plan: Vec<(usize, usize, usize)> = (0..3)
        .map(|a| {
            if src[a] >= target[a] {
                ((src[a] - target[a]) / 2, 0, target[a])
            } else {
                (0, (target[a] - src[a]) / 2, src[a])
            }
        })
        .collect();
    let mut cropped = Vec::with_capacity(plan.iter().map(|p| p.2).product());
    for x in 0..plan[0].2 {
        for y in 0..plan[1].2 {
            for z in 0..plan[2].2 {
                cropped.push(volume.get(x + plan[0].0, y + plan[1].0, z + plan[2].0));
            }
        }
    }
    let (lo, hi) = cropped
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let scaled = cropped.iter().map(|&v| if range > 0.0 { (v - lo) / range } else { 0.0 });

    let mut out = Volume::zeros(target);
    let mut it = scaled;
    for x in 0..plan[0].2 {
        for y in 0..plan[1].2 {
            for z in 0..plan[2].2 {
                let idx = out.index(x + plan[0].1, y + plan[1].1, z + plan[2].1);
                out.data[idx] = it.next().expect("sizes agree");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn byte_range_divides_by_255() {
        let data: Vec<f32> = (0..16).map(|i| (i * 17) as f32).collect();
        let v = Volume::new([4, 4, 1], data.clone()).unwrap();
        let out = preprocess(&v, [4, 4, 1]);
        for (o, d) in out.data.iter().zip(&data) {
            assert!((o - d / 255.0).abs() < 1e-6);
        }
    }

    #[test]
    fn matching_target_keeps_extent() {
        let v = Volume::new([80, 80, 80], (0..512000).map(|i| (i % 97) as f32).collect()).unwrap();
        let out = preprocess(&v, [80, 80, 80]);
        assert_eq!(out.shape, [80, 80, 80]);
        assert_eq!(out.data[5], 5.0 / 96.0);
    }

    #[test]
    fn constant_volume_becomes_zero() {
        let v = Volume::new([3, 3, 1], vec![7.0; 9]).unwrap();
        assert!(preprocess(&v, [5, 2, 1]).data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn crop_and_pad_are_centred() {
        let mut v = Volume::zeros([4, 4, 1]);
        let i = v.index(2, 1, 0);
        v.data[i] = 1.0;
        let cropped = preprocess(&v, [2, 2, 1]);
        assert_eq!(cropped.get(1, 0, 0), 1.0);
        let padded = preprocess(&v, [6, 6, 1]);
        assert_eq!(padded.get(3, 2, 0), 1.0);
    }

    proptest! {
        #[test]
        fn idempotent(
            data in prop::collection::vec(-50.0f32..50.0, 60),
            tx in 1usize..8, ty in 1usize..8,
        ) {
            let v = Volume::new([5, 4, 3], data).unwrap();
            let target = [tx, ty, 2];
            let once = preprocess(&v, target);
            let twice = preprocess(&once, target);
            prop_assert_eq!(once.data, twice.data);
        }
    }
}
