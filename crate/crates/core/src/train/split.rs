use crate::dataio::Dataset;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stratified train/test split: each class contributes its share of the
/// `round(fraction · n)` training slots (largest-remainder allocation).
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config("split_fraction", format!("must lie in (0, 1), got {fraction}")));
    }
    let labels = dataset.labels();
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        classes[l as usize].push(i);
    }
    for (label, members) in classes.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: label as u8,
                count: members.len(),
                required: 2,
            });
        }
    }
    let n = labels.len() as f64;
    let target = (fraction * n).round() as usize;
    let exact: Vec<f64> = classes.iter().map(|c| fraction * c.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..2).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut remaining = target.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if take[c] < classes[c].len() {
            take[c] += 1;
            remaining -= 1;
        }
    }
    // Both sides keep at least one member of each class.
    for (c, members) in classes.iter().enumerate() {
        take[c] = take[c].clamp(1, members.len() - 1);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, members) in classes.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..take[c]]);
        test.extend_from_slice(&members[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.select(&train), dataset.select(&test)))
}
