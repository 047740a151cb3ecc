//! Auto-orientation and letterbox resizing, with annotation re-projection
//! into the letterboxed frame.

use image::{imageops, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Annotation, NormalizedBBox, PixelBBox};
use crate::raster::resize_bilinear;

pub const DEFAULT_TARGET: u32 = 640;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("unsupported orientation code {0}; expected 1..=8")]
    UnsupportedOrientationCode(u8),
    #[error("letterbox target must be at least 2 px, got {0}")]
    TargetTooSmall(u32),
}

/// EXIF-style orientation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientationTag(u8);

impl OrientationTag {
    pub const IDENTITY: OrientationTag = OrientationTag(1);

    pub fn new(code: u8) -> Result<Self, PreprocessError> {
        if (1..=8).contains(&code) {
            Ok(Self(code))
        } else {
            Err(PreprocessError::UnsupportedOrientationCode(code))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Codes 5-8 involve a quarter turn, so width and height swap.
    pub fn swaps_dimensions(self) -> bool {
        self.0 >= 5
    }
}

impl Default for OrientationTag {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Physically applies the orientation so the pixels display correctly with
/// the tag removed.
pub fn auto_orient(image: &RgbImage, tag: OrientationTag) -> RgbImage {
    match tag.0 {
        1 => image.clone(),
        2 => imageops::flip_horizontal(image),
        3 => imageops::rotate180(image),
        4 => imageops::flip_vertical(image),
        // transpose
        5 => imageops::flip_horizontal(&imageops::rotate90(image)),
        6 => imageops::rotate90(image),
        // transverse
        7 => imageops::flip_horizontal(&imageops::rotate270(image)),
        8 => imageops::rotate270(image),
        _ => unreachable!("OrientationTag is validated on construction"),
    }
}

/// Geometry of a letterbox operation: uniform `scale`, then left/top padding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LetterboxTransform {
    pub scale: f64,
    pub pad_x: u32,
    pub pad_y: u32,
    pub target: u32,
    pub content_width: u32,
    pub content_height: u32,
}

impl LetterboxTransform {
    /// Computes the transform for a `width`×`height` source. Odd leftover
    /// padding goes to the right/bottom.
    pub fn for_source(width: u32, height: u32, target: u32) -> Result<Self, PreprocessError> {
        if target < 2 {
            return Err(PreprocessError::TargetTooSmall(target));
        }
        let (w, h) = (width.max(1), height.max(1));
        let scale = target as f64 / w.max(h) as f64;
        let content_width = ((w as f64 * scale).round() as u32).clamp(1, target);
        let content_height = ((h as f64 * scale).round() as u32).clamp(1, target);
        Ok(Self {
            scale,
            pad_x: (target - content_width) / 2,
            pad_y: (target - content_height) / 2,
            target,
            content_width,
            content_height,
        })
    }

    pub fn is_identity_for(&self, width: u32, height: u32) -> bool {
        self.scale == 1.0 && self.pad_x == 0 && self.pad_y == 0 && width == self.target && height == self.target
    }
}

/// Resizes into a `target`×`target` canvas preserving aspect ratio, with
/// black bars on the short axis.
pub fn letterbox(image: &RgbImage, target: u32) -> Result<(RgbImage, LetterboxTransform), PreprocessError> {
    let t = LetterboxTransform::for_source(image.width(), image.height(), target)?;
    if t.is_identity_for(image.width(), image.height()) {
        return Ok((image.clone(), t));
    }
    let content = resize_bilinear(image, t.content_width, t.content_height);
    let mut canvas = RgbImage::from_pixel(target, target, Rgb([0, 0, 0]));
    imageops::replace(&mut canvas, &content, t.pad_x as i64, t.pad_y as i64);
    Ok((canvas, t))
}

/// Maps annotations from the source normalized frame into the letterboxed
/// normalized frame.
pub fn project_annotations(
    annotations: &[Annotation],
    src_width: u32,
    src_height: u32,
    t: &LetterboxTransform,
) -> Vec<Annotation> {
    let target = t.target as f64;
    let kx = src_width as f64 * t.scale / target;
    let ky = src_height as f64 * t.scale / target;
    let ox = t.pad_x as f64 / target;
    let oy = t.pad_y as f64 / target;
    annotations
        .iter()
        .filter_map(|a| {
            let b = a.bbox;
            let moved = NormalizedBBox { cx: b.cx * kx + ox, cy: b.cy * ky + oy, w: b.w * kx, h: b.h * ky };
            let bbox = if moved.validate().is_ok() {
                moved
            } else {
                let (x0, y0, x1, y1) = moved.corners();
                PixelBBox::new(x0, y0, x1, y1)?.to_normalized(1.0, 1.0)?
            };
            Some(Annotation { class: a.class, bbox })
        })
        .collect()
}
