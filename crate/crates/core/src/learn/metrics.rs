//! Evaluation metrics: row-normalized confusion matrices, trapezoidal
//! ROC-AUC (tie-aware, so it agrees exactly with the pairwise Mann-Whitney
//! statistic), macro one-vs-rest AUC, and MAE.

use super::layers::Mat;
use serde::{Deserialize, Serialize};

/// Metric bundle for one (model, task) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Row-normalized percentages (rows = actual class, sum to 100).
    pub confusion: Option<Vec<Vec<f64>>>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    /// Mean absolute error in years (regression).
    pub mae: Option<f64>,
}

/// Confusion matrix in row-normalized percentages. Rows with no support stay
/// all-zero.
pub fn confusion_percent(preds: &[usize], actual: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &a) in preds.iter().zip(actual) {
        counts[a][p] += 1;
    }
    counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            if total == 0 {
                vec![0.0; n_classes]
            } else {
                row.into_iter()
                    .map(|c| 100.0 * c as f64 / total as f64)
                    .collect()
            }
        })
        .collect()
}

/// Trapezoidal ROC-AUC with tied scores grouped, which makes it identical to
/// the Mann-Whitney pairwise statistic (ties counted half).
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut auc = 0.0;
    let mut tp = 0.0;
    let mut i = 0;
    while i < order.len() {
        // group tied scores into one ROC step
        let mut j = i;
        let (mut d_tp, mut d_fp) = (0.0, 0.0);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if positive[order[j]] {
                d_tp += 1.0;
            } else {
                d_fp += 1.0;
            }
            j += 1;
        }
        let tpr0 = tp / n_pos;
        tp += d_tp;
        let tpr1 = tp / n_pos;
        auc += (d_fp / n_neg) * (tpr0 + tpr1) / 2.0;
        i = j;
    }
    auc
}

/// Macro one-vs-rest AUC over the class-probability columns.
pub fn macro_ovr_auc(probs: &Mat, actual: &[usize]) -> f64 {
    let c = probs.cols;
    let mut acc = 0.0;
    for class in 0..c {
        let scores: Vec<f64> = (0..probs.rows).map(|i| probs.at(i, class)).collect();
        let positive: Vec<bool> = actual.iter().map(|&a| a == class).collect();
        acc += roc_auc(&scores, &positive);
    }
    acc / c as f64
}

/// Binary tasks use the positive-class column; multi-class the macro OvR
/// average.
pub(super) fn task_auc(probs: &Mat, actual: &[usize]) -> f64 {
    if probs.cols == 2 {
        let scores: Vec<f64> = (0..probs.rows).map(|i| probs.at(i, 1)).collect();
        let positive: Vec<bool> = actual.iter().map(|&a| a == 1).collect();
        roc_auc(&scores, &positive)
    } else {
        macro_ovr_auc(probs, actual)
    }
}
