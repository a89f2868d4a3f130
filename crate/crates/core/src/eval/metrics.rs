use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC and precision-recall points from a descending threshold sweep.
///
/// Index 0 is the origin (nothing flagged) and has no threshold; point `i`
/// flags every item scoring at least `thresholds[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub thresholds: Vec<Option<f64>>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub auc: f64,
}

impl CurveResult {
    pub fn len(&self) -> usize {
        self.tpr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tpr.is_empty()
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / 2.0)
        .sum()
}

/// Higher scores mean more anomalous; `labels[i]` is true for anomalies.
/// Tied scores enter the curve together.
pub fn roc_pr(scores: &[f64], labels: &[bool]) -> Result<CurveResult> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score {s}")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Parameter("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut out = CurveResult {
        thresholds: vec![None],
        tpr: vec![0.0],
        fpr: vec![0.0],
        precision: vec![1.0],
        recall: vec![0.0],
        auc: 0.0,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        out.thresholds.push(Some(t));
        out.tpr.push(tpr);
        out.fpr.push(fp as f64 / neg as f64);
        out.precision.push(tp as f64 / (tp + fp) as f64);
        out.recall.push(tpr);
    }
    out.auc = trapezoid(&out.fpr, &out.tpr);
    Ok(out)
}
