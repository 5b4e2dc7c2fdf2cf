//! Geometric measurements on rendered or decoded annulus images.

use crate::dataio::{Volume, CAVITY_INTENSITY, SCAR_INTENSITY};
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Intensity band treated as cavity when flood-filling.
pub const CAVITY_BAND: (f32, f32) = (
    (CAVITY_INTENSITY + SCAR_INTENSITY) / 2.0,
    0.5,
);

/// Anything above this is tissue or cavity rather than background.
pub const FOREGROUND_THRESHOLD: f32 = SCAR_INTENSITY / 2.0;

fn in_band(v: f32) -> bool {
    v > CAVITY_BAND.0 && v < CAVITY_BAND.1
}

/// Voxel count of the cavity-intensity region connected to the centre voxel
/// (6-connectivity). Zero when the centre is not cavity-like.
pub fn measure_cavity_area(volume: &Volume) -> usize {
    let [sx, sy, sz] = volume.shape;
    let start = [sx / 2, sy / 2, sz / 2];
    // The rendered centre sits on a voxel corner; pick the nearest in-band voxel.
    let seeds = [
        start,
        [start[0].saturating_sub(1), start[1], start[2]],
        [start[0], start[1].saturating_sub(1), start[2]],
        [start[0].saturating_sub(1), start[1].saturating_sub(1), start[2]],
    ];
    let Some(seed) = seeds.into_iter().find(|&[x, y, z]| in_band(volume.get(x, y, z))) else {
        return 0;
    };
    let mut seen = vec![false; volume.len()];
    let mut queue = VecDeque::from([seed]);
    seen[volume.index(seed[0], seed[1], seed[2])] = true;
    let mut count = 0;
    while let Some([x, y, z]) = queue.pop_front() {
        count += 1;
        let neighbours = [
            (x.wrapping_sub(1), y, z),
            (x + 1, y, z),
            (x, y.wrapping_sub(1), z),
            (x, y + 1, z),
            (x, y, z.wrapping_sub(1)),
            (x, y, z + 1),
        ];
        for (nx, ny, nz) in neighbours {
            if nx >= sx || ny >= sy || nz >= sz {
                continue;
            }
            let i = volume.index(nx, ny, nz);
            if !seen[i] && in_band(volume.data[i]) {
                seen[i] = true;
                queue.push_back([nx, ny, nz]);
            }
        }
    }
    count
}

fn radius_from_count(count: usize, volumetric: bool) -> f64 {
    if volumetric {
        (3.0 * count as f64 / (4.0 * PI)).cbrt()
    } else {
        (count as f64 / PI).sqrt()
    }
}

/// Ring width estimated from areas: radius of the whole foreground disc minus
/// radius of the cavity disc.
pub fn measure_ring_width(volume: &Volume) -> f64 {
    let volumetric = volume.shape[2] > 1;
    let foreground = volume.data.iter().filter(|&&v| v > FOREGROUND_THRESHOLD).count();
    let cavity = measure_cavity_area(volume);
    radius_from_count(foreground, volumetric) - radius_from_count(cavity, volumetric)
}

/// Number of sequence positions where a value is lower than its predecessor.
pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}
