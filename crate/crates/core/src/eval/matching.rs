use serde::{Deserialize, Serialize};

use super::iou::iou_normalized;
use crate::model::{Annotation, Detection};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    /// Position in the caller's detection list.
    pub index: usize,
    pub class: usize,
    pub confidence: f64,
    pub true_positive: bool,
    pub matched_gt: Option<usize>,
    /// IoU with the matched ground truth, 0 for false positives.
    pub iou: f64,
}

/// Result of matching one image. `detections` is in processing order
/// (descending confidence with the documented tie-breaks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub detections: Vec<DetectionOutcome>,
    pub gt_classes: Vec<usize>,
    pub gt_matched: Vec<bool>,
}

impl MatchOutcome {
    pub fn true_positives(&self, class: usize) -> usize {
        self.detections.iter().filter(|d| d.class == class && d.true_positive).count()
    }

    pub fn false_positives(&self, class: usize) -> usize {
        self.detections.iter().filter(|d| d.class == class && !d.true_positive).count()
    }

    pub fn false_negatives(&self, class: usize) -> usize {
        self.gt_classes.iter().zip(&self.gt_matched).filter(|(c, m)| **c == class && !**m).count()
    }

    pub fn ground_truths(&self, class: usize) -> usize {
        self.gt_classes.iter().filter(|c| **c == class).count()
    }
}

/// Order in which detections claim ground truths: confidence descending,
/// then best same-class IoU descending, then input order.
pub(crate) fn priority_order(dets: &[Detection], gts: &[Annotation]) -> Vec<usize> {
    let best_iou: Vec<f64> = dets
        .iter()
        .map(|d| {
            gts.iter().filter(|g| g.class == d.class).map(|g| iou_normalized(&d.bbox, &g.bbox)).fold(0.0, f64::max)
        })
        .collect();
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b].confidence.total_cmp(&dets[a].confidence).then(best_iou[b].total_cmp(&best_iou[a])).then(a.cmp(&b))
    });
    order
}

/// Greedy class-matched assignment for a single image.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], iou_thresh: f64) -> MatchOutcome {
    let mut gt_matched = vec![false; gts.len()];
    let mut detections = Vec::with_capacity(dets.len());
    for idx in priority_order(dets, gts) {
        let d = &dets[idx];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.class != d.class || gt_matched[g] {
                continue;
            }
            let v = iou_normalized(&d.bbox, &gt.bbox);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
        }
        detections.push(DetectionOutcome {
            index: idx,
            class: d.class,
            confidence: d.confidence,
            true_positive: best.is_some(),
            matched_gt: best.map(|(g, _)| g),
            iou: best.map_or(0.0, |(_, v)| v),
        });
    }
    MatchOutcome { detections, gt_classes: gts.iter().map(|g| g.class).collect(), gt_matched }
}
