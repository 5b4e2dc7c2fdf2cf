use super::predict::ranks;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// `None` when only one class is present in the ground truth.
    pub auc: Option<f64>,
}

/// Accuracy at threshold 0.5 and ROC AUC via the Mann–Whitney rank statistic
/// (ties count one half).
pub fn classification_scores(y_pred: &[f64], y_true: &[u8]) -> Result<ClassificationScores> {
    if y_pred.len() != y_true.len() || y_pred.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: vec![y_true.len()],
            actual: vec![y_pred.len()],
        });
    }
    let correct = y_pred
        .iter()
        .zip(y_true)
        .filter(|(&p, &t)| u8::from(p >= 0.5) == t)
        .count();
    let accuracy = correct as f64 / y_true.len() as f64;
    let pos = y_true.iter().filter(|&&t| t == 1).count();
    let neg = y_true.len() - pos;
    let auc = (pos > 0 && neg > 0).then(|| {
        let r = ranks(y_pred);
        let rank_sum: f64 = r.iter().zip(y_true).filter(|(_, &t)| t == 1).map(|(r, _)| r).sum();
        let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
        u / (pos * neg) as f64
    });
    Ok(ClassificationScores { accuracy, auc })
}
