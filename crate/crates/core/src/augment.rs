//! Rotation and hue augmentation for the training split.
//!
//! Angles are in degrees, positive meaning clockwise as viewed (image `y`
//! grows downward). Rotation keeps the canvas size and fills exposed
//! corners with black; boxes are replaced by the axis-aligned envelope of
//! their rotated corners.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    read_label_file, write_label_file, Annotation, DatasetManifest, ImageRecord, LabelFileError, PixelBBox, Provenance,
    Split, TransformStep,
};
use crate::raster::{sample_bilinear, to_pixel};

/// Boxes whose clipped area falls below this many px² are dropped.
pub const MIN_BOX_AREA: f64 = 1.0;
/// Boxes keeping less than this fraction of their envelope after clipping
/// are dropped.
pub const MIN_VISIBLE_FRACTION: f64 = 0.1;

pub const DEFAULT_ROTATIONS: [f64; 4] = [15.0, 30.0, -15.0, -30.0];
pub const DEFAULT_MAX_TINT: f64 = 15.0;
pub const DEFAULT_HUE_COPIES: usize = 2;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("rotation {0}° outside (-180, 180]")]
    BadRotation(f64),
    #[error("max tint {0}° outside [0, 180]")]
    BadTint(f64),
    #[error("augmentation must target the train split, got {0:?}")]
    NotTrainSplit(Split),
    #[error("generated id `{0}` already exists")]
    NameCollision(String),
    #[error("source record `{0}` missing from manifest")]
    MissingSource(String),
    #[error(transparent)]
    Label(#[from] LabelFileError),
    #[error("image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec(f64);

impl RotationSpec {
    pub fn new(degrees: f64) -> Result<Self, AugmentError> {
        if degrees.is_finite() && degrees > -180.0 && degrees <= 180.0 {
            Ok(Self(degrees))
        } else {
            Err(AugmentError::BadRotation(degrees))
        }
    }

    pub fn degrees(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueSpec {
    pub max_tint: f64,
    pub copies: usize,
    pub seed: u64,
}

impl HueSpec {
    pub fn new(max_tint: f64, copies: usize, seed: u64) -> Result<Self, AugmentError> {
        if !(0.0..=180.0).contains(&max_tint) {
            return Err(AugmentError::BadTint(max_tint));
        }
        Ok(Self { max_tint, copies, seed })
    }

    pub fn none() -> Self {
        Self { max_tint: DEFAULT_MAX_TINT, copies: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub rotations: Vec<RotationSpec>,
    pub hue: HueSpec,
    pub applies_to: Split,
}

impl AugmentPlan {
    pub fn empty() -> Self {
        Self { rotations: Vec::new(), hue: HueSpec::none(), applies_to: Split::Train }
    }

    /// Images produced per source image, the source included.
    pub fn multiplier(&self) -> usize {
        (1 + self.rotations.len()) * (1 + self.hue.copies)
    }
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
fn sin_cos_deg(degrees: f64) -> (f64, f64) {
    let d = degrees.rem_euclid(360.0);
    match d {
        x if x == 0.0 => (0.0, 1.0),
        x if x == 90.0 => (1.0, 0.0),
        x if x == 180.0 => (0.0, -1.0),
        x if x == 270.0 => (-1.0, 0.0),
        _ => d.to_radians().sin_cos(),
    }
}

/// Rotates the image content about its center, keeping the canvas size.
pub fn rotate_image(image: &RgbImage, degrees: f64) -> RgbImage {
    if degrees == 0.0 {
        return image.clone();
    }
    let (sin, cos) = sin_cos_deg(degrees);
    let cx = (image.width() as f64 - 1.0) / 2.0;
    let cy = (image.height() as f64 - 1.0) / 2.0;
    RgbImage::from_fn(image.width(), image.height(), |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        // inverse rotation back into the source
        let sx = cx + dx * cos + dy * sin;
        let sy = cy - dx * sin + dy * cos;
        sample_bilinear(image, sx, sy).map_or(Rgb([0, 0, 0]), to_pixel)
    })
}

/// Axis-aligned envelope of the box's corners rotated about the canvas
/// center `(width/2, height/2)`, without clipping.
pub fn rotated_envelope(b: &PixelBBox, degrees: f64, width: f64, height: f64) -> PixelBBox {
    if degrees == 0.0 {
        return *b;
    }
    let (sin, cos) = sin_cos_deg(degrees);
    let (cx, cy) = (width / 2.0, height / 2.0);
    let corners = [(b.xmin, b.ymin), (b.xmax, b.ymin), (b.xmin, b.ymax), (b.xmax, b.ymax)];
    let mut env =
        PixelBBox { xmin: f64::INFINITY, ymin: f64::INFINITY, xmax: f64::NEG_INFINITY, ymax: f64::NEG_INFINITY };
    for (x, y) in corners {
        let dx = x - cx;
        let dy = y - cy;
        let rx = cx + dx * cos - dy * sin;
        let ry = cy + dx * sin + dy * cos;
        env.xmin = env.xmin.min(rx);
        env.xmax = env.xmax.max(rx);
        env.ymin = env.ymin.min(ry);
        env.ymax = env.ymax.max(ry);
    }
    env
}

/// Rotates a box with the image and refits it. Returns `None` when the box
/// ends up mostly or entirely outside the canvas.
pub fn rotate_bbox(b: &PixelBBox, degrees: f64, width: f64, height: f64) -> Option<PixelBBox> {
    if degrees == 0.0 {
        return Some(*b);
    }
    let env = rotated_envelope(b, degrees, width, height);
    let clipped = PixelBBox::new(env.xmin.max(0.0), env.ymin.max(0.0), env.xmax.min(width), env.ymax.min(height))?;
    let area = clipped.area();
    if area < MIN_BOX_AREA || area < MIN_VISIBLE_FRACTION * env.area() {
        return None;
    }
    Some(clipped)
}

pub fn rotate_annotations(annotations: &[Annotation], degrees: f64, width: u32, height: u32) -> Vec<Annotation> {
    if degrees == 0.0 {
        return annotations.to_vec();
    }
    let (w, h) = (width as f64, height as f64);
    annotations
        .iter()
        .filter_map(|a| {
            let rotated = rotate_bbox(&a.bbox.to_pixels(w, h), degrees, w, h)?;
            Some(Annotation { class: a.class, bbox: rotated.to_normalized(w, h)? })
        })
        .collect()
}

fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [f64; 3] {
    let chroma = val * sat;
    let h = hue.rem_euclid(360.0) / 60.0;
    let x = chroma * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    let m = val - chroma;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// Rotates every pixel's hue by `delta` degrees, leaving saturation and
/// value alone.
pub fn hue_shift(image: &RgbImage, delta: f64) -> RgbImage {
    if delta == 0.0 {
        return image.clone();
    }
    let mut out = image.clone();
    for p in out.pixels_mut() {
        let (h, s, v) = rgb_to_hsv(p.0);
        if s == 0.0 {
            continue;
        }
        *p = to_pixel(hsv_to_rgb(h + delta, s, v));
    }
    out
}

fn fmt_degrees(d: f64) -> String {
    format!("{d}")
}

fn rotation_id(source: &str, degrees: f64) -> String {
    format!("{source}__rot{}", fmt_degrees(degrees))
}

fn hue_id(base: &str, delta: f64) -> String {
    format!("{base}__hue{}", delta.round() as i64)
}

const HUE_REDRAWS: usize = 64;

/// Adds generated training records for every train-split source. Val and
/// test records pass through untouched. Each generated record carries its
/// source id and transform chain; image files are produced separately by
/// [`materialize`].
pub fn expand_dataset(manifest: &DatasetManifest, plan: &AugmentPlan) -> Result<DatasetManifest, AugmentError> {
    if plan.applies_to != Split::Train {
        return Err(AugmentError::NotTrainSplit(plan.applies_to));
    }
    for r in &plan.rotations {
        RotationSpec::new(r.0)?;
    }
    HueSpec::new(plan.hue.max_tint, plan.hue.copies, plan.hue.seed)?;

    let mut taken: HashSet<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.hue.seed);
    let mut generated = Vec::new();

    for src in manifest.in_split(Split::Train) {
        let mut variants: Vec<(String, Vec<TransformStep>)> = vec![(src.id.clone(), Vec::new())];
        for r in &plan.rotations {
            variants.push((rotation_id(&src.id, r.0), vec![TransformStep::Rotate { degrees: r.0 }]));
        }
        for (base_id, chain) in variants {
            if !chain.is_empty() {
                generated.push(generated_record(src, &base_id, chain.clone(), &mut taken)?);
            }
            let mut sibling_ids = HashSet::new();
            for _ in 0..plan.hue.copies {
                let mut attempt = 0;
                let (id, delta) = loop {
                    let delta = if plan.hue.max_tint > 0.0 {
                        rng.random_range(-plan.hue.max_tint..=plan.hue.max_tint)
                    } else {
                        0.0
                    };
                    let id = hue_id(&base_id, delta);
                    if !sibling_ids.contains(&id) || attempt >= HUE_REDRAWS {
                        break (id, delta);
                    }
                    attempt += 1;
                };
                sibling_ids.insert(id.clone());
                let mut hue_chain = chain.clone();
                hue_chain.push(TransformStep::Hue { delta });
                generated.push(generated_record(src, &id, hue_chain, &mut taken)?);
            }
        }
    }

    debug!("expansion generated {} records", generated.len());
    let mut out = manifest.clone();
    out.records.extend(generated);
    Ok(out)
}

fn generated_record(
    src: &ImageRecord,
    id: &str,
    transforms: Vec<TransformStep>,
    taken: &mut HashSet<String>,
) -> Result<ImageRecord, AugmentError> {
    if !taken.insert(id.to_string()) {
        return Err(AugmentError::NameCollision(id.to_string()));
    }
    let ext = src.path.extension().and_then(|e| e.to_str()).unwrap_or("png");
    let ext = if ext.eq_ignore_ascii_case("png") { ext } else { "png" };
    Ok(ImageRecord {
        id: id.to_string(),
        path: PathBuf::from(format!("{id}.{ext}")),
        width: src.width,
        height: src.height,
        split: Split::Train,
        provenance: Some(Provenance { source_id: src.id.clone(), transforms }),
    })
}

/// Applies a transform chain to an image and its labels.
pub fn apply_chain(image: &RgbImage, labels: &[Annotation], chain: &[TransformStep]) -> (RgbImage, Vec<Annotation>) {
    let mut img = image.clone();
    let mut ann = labels.to_vec();
    for step in chain {
        match *step {
            TransformStep::Rotate { degrees } => {
                img = rotate_image(&img, degrees);
                ann = rotate_annotations(&ann, degrees, img.width(), img.height());
            }
            TransformStep::Hue { delta } => img = hue_shift(&img, delta),
        }
    }
    (img, ann)
}

/// Writes images and labels for every generated record of `expanded`.
///
/// Source images are resolved as `images_dir/<record.path>` and source
/// labels as `labels_dir/<source id>.txt` (a missing label file means no
/// objects). Outputs land in `out_dir/images` and `out_dir/labels`.
pub fn materialize(
    expanded: &DatasetManifest,
    images_dir: &Path,
    labels_dir: &Path,
    out_dir: &Path,
) -> Result<usize, AugmentError> {
    let img_out = out_dir.join("images");
    let lbl_out = out_dir.join("labels");
    for d in [&img_out, &lbl_out] {
        fs::create_dir_all(d).map_err(|e| AugmentError::Io(d.display().to_string(), e))?;
    }
    let n_classes = expanded.classes.len();
    let jobs: Vec<(&ImageRecord, &Provenance)> =
        expanded.records.iter().filter_map(|r| r.provenance.as_ref().map(|p| (r, p))).collect();

    jobs.par_iter()
        .map(|(rec, prov)| {
            let src =
                expanded.record(&prov.source_id).ok_or_else(|| AugmentError::MissingSource(prov.source_id.clone()))?;
            let src_path = images_dir.join(&src.path);
            let image = image::open(&src_path)
                .map_err(|source| AugmentError::Image { path: src_path.display().to_string(), source })?
                .to_rgb8();
            let label_path = labels_dir.join(format!("{}.txt", src.id));
            let labels = if label_path.exists() { read_label_file(&label_path, n_classes)? } else { Vec::new() };
            let (img, ann) = apply_chain(&image, &labels, &prov.transforms);
            let dst = img_out.join(&rec.path);
            img.save(&dst).map_err(|source| AugmentError::Image { path: dst.display().to_string(), source })?;
            let lbl = lbl_out.join(format!("{}.txt", rec.id));
            write_label_file(&lbl, &ann).map_err(|e| AugmentError::Io(lbl.display().to_string(), e))?;
            Ok(())
        })
        .collect::<Result<Vec<()>, AugmentError>>()
        .map(|v| v.len())
}
