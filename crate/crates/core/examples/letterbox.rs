//! Letterboxes a 1000x750 image to 640x640 and projects one label.

use gridsight::model::{Annotation, NormalizedBBox};
use gridsight::preprocess::{letterbox, project_annotations};
use image::{Rgb, RgbImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let src = RgbImage::from_fn(1000, 750, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 128]));
    let (out, t) = letterbox(&src, 640)?;
    println!("output {}x{}", out.width(), out.height());
    println!("scale {} content {}x{} pad ({}, {})", t.scale, t.content_width, t.content_height, t.pad_x, t.pad_y);

    let label = [Annotation { class: 0, bbox: NormalizedBBox::new(0.5, 0.5, 0.2, 0.2)? }];
    let b = project_annotations(&label, 1000, 750, &t)[0].bbox;
    println!("box (0.5, 0.5, 0.2, 0.2) -> ({:.4}, {:.4}, {:.4}, {:.4})", b.cx, b.cy, b.w, b.h);
    Ok(())
}
