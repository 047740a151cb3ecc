use serde::{Deserialize, Serialize};

use super::iou::iou_normalized;
use crate::model::{Annotation, Detection};

/// `(K+1)×(K+1)` counts. Rows are ground-truth classes, columns predicted
/// classes; index `K` is background in both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self { n_classes, counts: vec![vec![0; n_classes + 1]; n_classes + 1] }
    }

    pub fn background(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt][pred]
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n_classes, other.n_classes, "merging matrices of different size");
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }

    pub fn row_total(&self, gt: usize) -> u64 {
        self.counts[gt].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Confusion counts for one image. Detections under `conf_thresh` are
/// ignored; the rest are paired with ground truths regardless of class,
/// highest IoU first.
pub fn confusion(
    dets: &[Detection],
    gts: &[Annotation],
    n_classes: usize,
    iou_thresh: f64,
    conf_thresh: f64,
) -> ConfusionMatrix {
    let kept: Vec<&Detection> = dets.iter().filter(|d| d.confidence >= conf_thresh).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in kept.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            let v = iou_normalized(&d.bbox, &g.bbox);
            if v > 0.0 && v >= iou_thresh {
                pairs.push((v, di, gi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(kept[b.1].confidence.total_cmp(&kept[a.1].confidence))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut m = ConfusionMatrix::new(n_classes);
    let bg = m.background();
    let mut det_used = vec![false; kept.len()];
    let mut gt_used = vec![false; gts.len()];
    for (_, di, gi) in pairs {
        if det_used[di] || gt_used[gi] {
            continue;
        }
        det_used[di] = true;
        gt_used[gi] = true;
        m.counts[gts[gi].class][kept[di].class] += 1;
    }
    for (gi, g) in gts.iter().enumerate() {
        if !gt_used[gi] {
            m.counts[g.class][bg] += 1;
        }
    }
    for (di, d) in kept.iter().enumerate() {
        if !det_used[di] {
            m.counts[bg][d.class] += 1;
        }
    }
    m
}
