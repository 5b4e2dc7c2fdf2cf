//! Single-dimension predictability scores: SAP, Spearman and interpretability.

use super::info::{mi_matrix_raw, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::losses::AttributeMapping;
use indexmap::IndexMap;
use ndarray::{Array2, ArrayView1};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Coefficient of determination of the least-squares fit `y ≈ w·x + b`.
/// `None` when `y` is constant; 0 when `x` is constant.
pub fn r_squared(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if syy <= 0.0 {
        return None;
    }
    if sxx <= 0.0 {
        return Some(0.0);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let w = sxy / sxx;
    let b = my - w * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, t)| (t - (w * a + b)).powi(2)).sum();
    Some(1.0 - ss_res / syy)
}

/// Average (mid) ranks, 1-based.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

fn distinct_values(v: ArrayView1<f64>) -> Vec<f64> {
    let mut d: Vec<f64> = v.to_vec();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

/// Best balanced accuracy of a single threshold on `x` predicting `positive`.
fn threshold_balanced_accuracy(x: &[f64], positive: &[bool]) -> f64 {
    let pos = positive.iter().filter(|&&p| p).count() as f64;
    let neg = positive.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    // Predict positive for values above the threshold; sweep thresholds
    // between distinct values, both orientations.
    let (mut pos_below, mut neg_below) = (0.0, 0.0);
    let mut best: f64 = 0.5;
    let mut i = 0;
    while i < idx.len() {
        let v = x[idx[i]];
        while i < idx.len() && x[idx[i]] == v {
            if positive[idx[i]] {
                pos_below += 1.0;
            } else {
                neg_below += 1.0;
            }
            i += 1;
        }
        let tpr = (pos - pos_below) / pos;
        let tnr = neg_below / neg;
        let bal = 0.5 * (tpr + tnr);
        best = best.max(bal).max(1.0 - bal);
    }
    best
}

/// Predictability of attribute column `a` from latent column `z`.
fn dimension_score(z: &[f64], a: ArrayView1<f64>) -> f64 {
    let values = distinct_values(a);
    if values.len() == 2 {
        let positive: Vec<bool> = a.iter().map(|&v| v == values[1]).collect();
        threshold_balanced_accuracy(z, &positive)
    } else {
        r_squared(z, &a.to_vec()).unwrap_or(0.0).max(0.0)
    }
}

/// Separated attribute predictability: mean gap between the best and
/// second-best single-dimension predictors of each attribute.
pub fn sap(z: &Array2<f64>, a: &Array2<f64>) -> Result<f64> {
    if z.nrows() < 10 {
        return Err(Error::InvalidArgument(format!("SAP needs n >= 10, got {}", z.nrows())));
    }
    if z.ncols() < 2 {
        return Err(Error::InvalidArgument("SAP needs at least two latent dimensions".into()));
    }
    let cols: Vec<Vec<f64>> = z.columns().into_iter().map(|c| c.to_vec()).collect();
    let gaps: Vec<f64> = a
        .columns()
        .into_iter()
        .map(|attr| {
            let mut s: Vec<f64> = cols.iter().map(|c| dimension_score(c, attr)).collect();
            s.sort_by(|x, y| y.total_cmp(x));
            (s[0] - s[1]).max(0.0)
        })
        .collect();
    Ok(mean(&gaps))
}

/// Mean over attributes of the maximum |Spearman| across latent dimensions.
pub fn scc(z: &Array2<f64>, a: &Array2<f64>) -> Result<f64> {
    if z.nrows() < 3 {
        return Err(Error::InvalidArgument(format!("SCC needs n >= 3, got {}", z.nrows())));
    }
    let cols: Vec<Vec<f64>> = z.columns().into_iter().map(|c| c.to_vec()).collect();
    let per: Vec<f64> = a
        .columns()
        .into_iter()
        .map(|attr| {
            let attr = attr.to_vec();
            cols.iter().map(|c| spearman(c, &attr).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(mean(&per))
}

/// |Spearman| between each mapped attribute and its regularized dimension.
pub fn scc_mapped(
    z: &Array2<f64>,
    a: &Array2<f64>,
    names: &[String],
    mapping: &AttributeMapping,
) -> Result<IndexMap<String, f64>> {
    let mut out = IndexMap::new();
    for (name, dim) in mapping.entries() {
        let k = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
        out.insert(name.clone(), spearman(&z.column(*dim).to_vec(), &a.column(k).to_vec()).abs());
    }
    Ok(out)
}

/// Latent dimension used to score each attribute: the mapped dimension when
/// a mapping covers it, otherwise the dimension with the highest MI.
pub fn interpretability_dims(
    z: &Array2<f64>,
    a: &Array2<f64>,
    names: &[String],
    mapping: Option<&AttributeMapping>,
) -> Result<Vec<usize>> {
    let mi = mi_matrix_raw(z, a, DEFAULT_BINS)?;
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            mapping.and_then(|m| m.dim_of(name)).unwrap_or_else(|| {
                (0..z.ncols())
                    .max_by(|&p, &q| mi[[p, k]].total_cmp(&mi[[q, k]]).then(q.cmp(&p)))
                    .unwrap_or(0)
            })
        })
        .collect())
}

/// Clipped R² of a one-dimensional linear fit per attribute; `None` for a
/// constant attribute.
pub fn interpretability(
    z: &Array2<f64>,
    a: &Array2<f64>,
    names: &[String],
    mapping: Option<&AttributeMapping>,
) -> Result<IndexMap<String, Option<f64>>> {
    if names.len() != a.ncols() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.ncols()],
            actual: vec![names.len()],
        });
    }
    if let Some(m) = mapping {
        m.validate(z.ncols())?;
    }
    let dims = interpretability_dims(z, a, names, mapping)?;
    Ok(names
        .iter()
        .zip(dims)
        .enumerate()
        .map(|(k, (name, d))| {
            let score = r_squared(&z.column(d).to_vec(), &a.column(k).to_vec()).map(|r| r.max(0.0));
            (name.clone(), score)
        })
        .collect())
}
