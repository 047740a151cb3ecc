//! Detection metrics: IoU, confidence-greedy matching, precision-recall
//! curves, all-points AP, mAP@50 and a confusion matrix with a background
//! class.
//!
//! AP/mAP use class-matched greedy matching. The confusion matrix matches
//! class-agnostically so misclassifications land off the diagonal.

mod ap;
mod confusion;
mod iou;
mod matching;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap::{average_precision, map50, pr_curve, summarize, ApResult, EvalSummary, PRPoint};
pub use confusion::{confusion, ConfusionMatrix};
pub use iou::{iou, iou_normalized, iou_pixel, FramedBox};
pub use matching::{match_detections, DetectionOutcome, MatchOutcome, DEFAULT_IOU_THRESHOLD};

use crate::model::{read_label_file, read_prediction_file, Annotation, ClassList, Detection, LabelFileError};

pub const DEFAULT_CONFUSION_CONF: f64 = 0.25;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("boxes are in different frames")]
    MixedFrames,
    #[error("class {0} has no ground truth")]
    NoGroundTruth(usize),
    #[error("no class has ground truth")]
    NoEvaluableClasses,
    #[error(transparent)]
    Label(#[from] LabelFileError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Ground truth and predictions for one image.
#[derive(Debug, Clone, Default)]
pub struct ImageEval {
    pub name: String,
    pub ground_truth: Vec<Annotation>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub name: String,
    pub ground_truths: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub ap50: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub iou_threshold: f64,
    pub confusion_conf_threshold: f64,
    pub images: usize,
    pub summary: EvalSummary,
    pub per_class: Vec<ClassStats>,
    pub confusion: ConfusionMatrix,
    pub pr_curves: BTreeMap<String, Vec<PRPoint>>,
}

pub fn evaluate_images(
    images: &[ImageEval],
    classes: &ClassList,
    iou_thresh: f64,
    conf_thresh: f64,
) -> Result<EvalReport, EvalError> {
    let n = classes.len();
    let outcomes: Vec<MatchOutcome> =
        images.iter().map(|im| match_detections(&im.detections, &im.ground_truth, iou_thresh)).collect();
    let mut matrix = ConfusionMatrix::new(n);
    for im in images {
        matrix.merge(&confusion(&im.detections, &im.ground_truth, n, iou_thresh, conf_thresh));
    }
    let (summary, results) = summarize(&outcomes, n)?;
    let per_class = (0..n)
        .map(|c| ClassStats {
            class: c,
            name: classes.name(c).unwrap_or_default().to_string(),
            ground_truths: outcomes.iter().map(|o| o.ground_truths(c)).sum(),
            true_positives: outcomes.iter().map(|o| o.true_positives(c)).sum(),
            false_positives: outcomes.iter().map(|o| o.false_positives(c)).sum(),
            false_negatives: outcomes.iter().map(|o| o.false_negatives(c)).sum(),
            ap50: summary.ap_per_class.get(&c).copied(),
        })
        .collect();
    let pr_curves =
        results.into_iter().map(|r| (classes.name(r.class).unwrap_or_default().to_string(), r.curve)).collect();
    Ok(EvalReport {
        classes: classes.names(),
        iou_threshold: iou_thresh,
        confusion_conf_threshold: conf_thresh,
        images: images.len(),
        summary,
        per_class,
        confusion: matrix,
        pr_curves,
    })
}

fn txt_stems(dir: &Path) -> Result<BTreeSet<String>, EvalError> {
    let entries = fs::read_dir(dir).map_err(|e| EvalError::Io(dir.display().to_string(), e))?;
    let mut out = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| EvalError::Io(dir.display().to_string(), e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string());
            }
        }
    }
    Ok(out)
}

/// Loads label files from `gt_dir` and prediction files from `pred_dir`,
/// paired by basename. A missing file on either side counts as empty.
pub fn load_dir_pairs(gt_dir: &Path, pred_dir: &Path, n_classes: usize) -> Result<Vec<ImageEval>, EvalError> {
    let gt = txt_stems(gt_dir)?;
    let pred = txt_stems(pred_dir)?;
    gt.union(&pred)
        .map(|name| {
            let g = gt_dir.join(format!("{name}.txt"));
            let p = pred_dir.join(format!("{name}.txt"));
            Ok(ImageEval {
                name: name.clone(),
                ground_truth: if g.exists() { read_label_file(&g, n_classes)? } else { Vec::new() },
                detections: if p.exists() { read_prediction_file(&p, n_classes)? } else { Vec::new() },
            })
        })
        .collect()
}

pub fn evaluate_dirs(
    gt_dir: &Path,
    pred_dir: &Path,
    classes: &ClassList,
    iou_thresh: f64,
    conf_thresh: f64,
) -> Result<EvalReport, EvalError> {
    let images = load_dir_pairs(gt_dir, pred_dir, classes.len())?;
    evaluate_images(&images, classes, iou_thresh, conf_thresh)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let width = self.classes.iter().map(|c| c.len()).max().unwrap_or(5).max(10);
        let _ =
            writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}", "Class", "GT", "TP", "FP", "FN", "AP@50");
        for s in &self.per_class {
            let ap = s.ap50.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
                s.name, s.ground_truths, s.true_positives, s.false_positives, s.false_negatives, ap
            );
        }
        let _ = writeln!(
            out,
            "mAP@50: {:.3} over {} images (IoU >= {})",
            self.summary.map50, self.images, self.iou_threshold
        );
        if !self.summary.excluded_classes.is_empty() {
            let names: Vec<&str> =
                self.summary.excluded_classes.iter().filter_map(|c| self.classes.get(*c).map(String::as_str)).collect();
            let _ = writeln!(out, "excluded (no ground truth): {}", names.join(", "));
        }
        let _ = writeln!(
            out,
            "\nConfusion matrix (rows: ground truth, columns: predicted, conf >= {})",
            self.confusion_conf_threshold
        );
        let mut labels = self.classes.clone();
        labels.push("background".into());
        let cw = labels.iter().map(|l| l.len()).max().unwrap_or(10);
        let _ = write!(out, "{:<cw$}", "");
        for l in &labels {
            let _ = write!(out, "  {l:>cw$}");
        }
        out.push('\n');
        for (row, l) in self.confusion.counts.iter().zip(&labels) {
            let _ = write!(out, "{l:<cw$}");
            for v in row {
                let _ = write!(out, "  {v:>cw$}");
            }
            out.push('\n');
        }
        out
    }
}
