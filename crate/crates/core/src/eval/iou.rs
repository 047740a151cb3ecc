use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{NormalizedBBox, PixelBBox};

/// A box tagged with the frame its coordinates live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FramedBox {
    Normalized(NormalizedBBox),
    Pixel(PixelBBox),
}

fn corner_iou((ax0, ay0, ax1, ay1): (f64, f64, f64, f64), (bx0, by0, bx1, by1): (f64, f64, f64, f64)) -> f64 {
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    (inter / union).clamp(0.0, 1.0)
}

fn pixel_corners(p: &PixelBBox) -> (f64, f64, f64, f64) {
    (p.xmin, p.ymin, p.xmax, p.ymax)
}

pub fn iou_normalized(a: &NormalizedBBox, b: &NormalizedBBox) -> f64 {
    if a == b {
        return 1.0;
    }
    corner_iou(a.corners(), b.corners())
}

pub fn iou_pixel(a: &PixelBBox, b: &PixelBBox) -> f64 {
    if a == b {
        return 1.0;
    }
    corner_iou(pixel_corners(a), pixel_corners(b))
}

/// Intersection over union of two boxes in the same frame.
pub fn iou(a: &FramedBox, b: &FramedBox) -> Result<f64, EvalError> {
    match (a, b) {
        (FramedBox::Normalized(a), FramedBox::Normalized(b)) => Ok(iou_normalized(a, b)),
        (FramedBox::Pixel(a), FramedBox::Pixel(b)) => Ok(iou_pixel(a, b)),
        _ => Err(EvalError::MixedFrames),
    }
}
