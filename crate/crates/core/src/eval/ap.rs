use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matching::MatchOutcome;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub precision: f64,
    pub recall: f64,
    /// Confidence of the detection at which this point is reached.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub class: usize,
    pub ap: f64,
    pub ground_truths: usize,
    pub curve: Vec<PRPoint>,
}

/// Precision-recall curve for one class across images, one point per
/// detection in descending-confidence order. Equal confidences keep image
/// order, then per-image processing order.
pub fn pr_curve(outcomes: &[MatchOutcome], class: usize) -> (Vec<PRPoint>, usize) {
    let n_gt: usize = outcomes.iter().map(|o| o.ground_truths(class)).sum();
    let mut ranked: Vec<(f64, bool)> = outcomes
        .iter()
        .flat_map(|o| o.detections.iter())
        .filter(|d| d.class == class)
        .map(|d| (d.confidence, d.true_positive))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut tp = 0usize;
    let mut curve = Vec::with_capacity(ranked.len());
    for (i, (conf, hit)) in ranked.iter().enumerate() {
        tp += *hit as usize;
        curve.push(PRPoint {
            precision: tp as f64 / (i + 1) as f64,
            recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
            threshold: *conf,
        });
    }
    (curve, n_gt)
}

/// All-points interpolated average precision: the exact area under the
/// monotone precision envelope.
pub fn average_precision(outcomes: &[MatchOutcome], class: usize) -> Result<ApResult, EvalError> {
    let (curve, n_gt) = pr_curve(outcomes, class);
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth(class));
    }
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in curve.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    Ok(ApResult { class, ap: ap.clamp(0.0, 1.0), ground_truths: n_gt, curve })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub ap_per_class: BTreeMap<usize, f64>,
    /// Classes without ground truth; they have no defined AP.
    pub excluded_classes: Vec<usize>,
    pub map50: f64,
}

/// Mean AP over the classes that have ground truth. `None` marks a class
/// without ground truth.
pub fn map50(per_class: &BTreeMap<usize, Option<f64>>) -> Result<EvalSummary, EvalError> {
    let ap_per_class: BTreeMap<usize, f64> = per_class.iter().filter_map(|(c, ap)| ap.map(|v| (*c, v))).collect();
    if ap_per_class.is_empty() {
        return Err(EvalError::NoEvaluableClasses);
    }
    let excluded_classes = per_class.iter().filter(|(_, ap)| ap.is_none()).map(|(c, _)| *c).collect();
    let map50 = ap_per_class.values().sum::<f64>() / ap_per_class.len() as f64;
    Ok(EvalSummary { ap_per_class, excluded_classes, map50 })
}

/// Runs [`average_precision`] for every class id below `n_classes` and
/// aggregates with [`map50`].
pub fn summarize(outcomes: &[MatchOutcome], n_classes: usize) -> Result<(EvalSummary, Vec<ApResult>), EvalError> {
    let mut per_class = BTreeMap::new();
    let mut results = Vec::new();
    for class in 0..n_classes {
        match average_precision(outcomes, class) {
            Ok(r) => {
                per_class.insert(class, Some(r.ap));
                results.push(r);
            }
            Err(EvalError::NoGroundTruth(_)) => {
                per_class.insert(class, None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((map50(&per_class)?, results))
}
