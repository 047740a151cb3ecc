use serde::{Deserialize, Serialize};

/// Slack allowed on box edges so values that went through fixed-precision
/// text still validate.
pub const BOX_EPSILON: f64 = 1e-6;

/// Box in YOLO center-size encoding, every field a fraction of the image
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BoxViolation {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("center outside [0, 1]")]
    CenterOutside,
    #[error("width or height not positive")]
    NonPositiveSize,
    #[error("width or height above 1")]
    SizeAboveOne,
    #[error("edge outside the image")]
    EdgeOutside,
}

impl NormalizedBBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxViolation> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BoxViolation> {
        let Self { cx, cy, w, h } = *self;
        if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(BoxViolation::NonFinite);
        }
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
            return Err(BoxViolation::CenterOutside);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(BoxViolation::NonPositiveSize);
        }
        if w > 1.0 || h > 1.0 {
            return Err(BoxViolation::SizeAboveOne);
        }
        let lo = -BOX_EPSILON;
        let hi = 1.0 + BOX_EPSILON;
        if cx - w / 2.0 < lo || cx + w / 2.0 > hi || cy - h / 2.0 < lo || cy + h / 2.0 > hi {
            return Err(BoxViolation::EdgeOutside);
        }
        Ok(())
    }

    /// Corners in the same unit frame: `(xmin, ymin, xmax, ymax)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.cx + self.w / 2.0, self.cy + self.h / 2.0)
    }

    pub fn to_pixels(&self, width: f64, height: f64) -> PixelBBox {
        let (x0, y0, x1, y1) = self.corners();
        PixelBBox { xmin: x0 * width, ymin: y0 * height, xmax: x1 * width, ymax: y1 * height }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Box in continuous pixel coordinates of some image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl PixelBBox {
    /// Returns `None` unless `xmin < xmax` and `ymin < ymax`.
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Option<Self> {
        (xmin < xmax && ymin < ymax).then_some(Self { xmin, ymin, xmax, ymax })
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)
    }

    pub fn contains(&self, other: &PixelBBox) -> bool {
        self.xmin <= other.xmin && self.ymin <= other.ymin && self.xmax >= other.xmax && self.ymax >= other.ymax
    }

    /// Converts back to the normalized frame, clamping edges into `[0, 1]`.
    /// Returns `None` if nothing with positive area is left.
    pub fn to_normalized(&self, width: f64, height: f64) -> Option<NormalizedBBox> {
        let x0 = (self.xmin / width).clamp(0.0, 1.0);
        let x1 = (self.xmax / width).clamp(0.0, 1.0);
        let y0 = (self.ymin / height).clamp(0.0, 1.0);
        let y1 = (self.ymax / height).clamp(0.0, 1.0);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        NormalizedBBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0).ok()
    }
}
