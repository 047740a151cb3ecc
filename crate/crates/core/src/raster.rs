//! Small raster helpers shared by the image transforms.

use std::path::Path;

use image::{ImageReader, Rgb, RgbImage};

pub use image::RgbImage as Raster;

/// Bilinear sample at continuous pixel-index coordinates (pixel `i` has its
/// center at `i`). Coordinates within half a pixel of the border are clamped
/// to the edge; anything further out yields `None`.
pub fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> Option<[f64; 3]> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if !(x >= -0.5 && x <= w - 0.5 && y >= -0.5 && y <= h - 0.5) {
        return None;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p00 = img.get_pixel(x0, y0).0;
    let p10 = img.get_pixel(x1, y0).0;
    let p01 = img.get_pixel(x0, y1).0;
    let p11 = img.get_pixel(x1, y1).0;
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    Some(out)
}

pub fn to_pixel(v: [f64; 3]) -> Rgb<u8> {
    Rgb(v.map(|c| c.round().clamp(0.0, 255.0) as u8))
}

/// Bilinear resize with half-pixel-center alignment.
pub fn resize_bilinear(img: &RgbImage, new_w: u32, new_h: u32) -> RgbImage {
    if new_w == img.width() && new_h == img.height() {
        return img.clone();
    }
    let sx = img.width() as f64 / new_w as f64;
    let sy = img.height() as f64 / new_h as f64;
    RgbImage::from_fn(new_w, new_h, |x, y| {
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        let v = sample_bilinear(img, src_x, src_y).expect("half-pixel mapping stays inside the source");
        to_pixel(v)
    })
}

/// Decodes an image and returns it with its EXIF orientation code (1 when
/// the container carries none).
pub fn load_with_orientation(path: &Path) -> image::ImageResult<(RgbImage, u8)> {
    use image::ImageDecoder;
    let mut decoder = ImageReader::open(path)?.with_guessed_format()?.into_decoder()?;
    let code = decoder.orientation().map(|o| o.to_exif()).unwrap_or(1);
    let img = image::DynamicImage::from_decoder(decoder)?.to_rgb8();
    Ok((img, code))
}

pub fn mean_abs_diff(a: &RgbImage, b: &RgbImage) -> f64 {
    assert_eq!(a.dimensions(), b.dimensions());
    let total: u64 = a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| x.abs_diff(*y) as u64).sum();
    total as f64 / a.as_raw().len().max(1) as f64
}
