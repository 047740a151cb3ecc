//! Rotation and hue augmentation: box geometry, dataset expansion and
//! writing augmented copies to disk.

use std::fs;

use gridsight::augment::{self, AugmentPlan, HueSpec, RotationSpec, DEFAULT_ROTATIONS};
use gridsight::model::{
    split_dataset, write_label_file, Annotation, ClassList, ImageRecord, NormalizedBBox, PixelBBox, Split, SplitRatios,
};
use image::{Rgb, RgbImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let square = PixelBBox::new(90.0, 90.0, 110.0, 110.0).unwrap();
    let env = augment::rotated_envelope(&square, 45.0, 200.0, 200.0);
    println!("20x20 box at 45 deg -> envelope {:.4} x {:.4}", env.width(), env.height());

    let dir = tempfile::tempdir()?;
    let (images, labels) = (dir.path().join("images"), dir.path().join("labels"));
    fs::create_dir_all(&images)?;
    fs::create_dir_all(&labels)?;
    let mut records = Vec::new();
    for i in 0..10 {
        let id = format!("img{i:02}");
        RgbImage::from_fn(64, 64, |x, y| Rgb([200, (x * 4) as u8, (y * 4) as u8]))
            .save(images.join(format!("{id}.png")))?;
        write_label_file(
            &labels.join(format!("{id}.txt")),
            &[Annotation { class: 1, bbox: NormalizedBBox::new(0.5, 0.5, 0.25, 0.25)? }],
        )?;
        records.push(ImageRecord::new(&id, format!("{id}.png"), 64, 64));
    }
    let manifest = split_dataset(records, ClassList::canonical(), SplitRatios::DEFAULT, 42)?;
    let plan = AugmentPlan {
        rotations: DEFAULT_ROTATIONS.iter().map(|&d| RotationSpec::new(d)).collect::<Result<_, _>>()?,
        hue: HueSpec::new(15.0, 1, 7)?,
        applies_to: Split::Train,
    };
    let expanded = augment::expand_dataset(&manifest, &plan)?;
    println!("train {} -> {} (x{})", manifest.count(Split::Train), expanded.count(Split::Train), plan.multiplier());
    let written = augment::materialize(&expanded, &images, &labels, &dir.path().join("out"))?;
    println!("wrote {written} augmented images");
    Ok(())
}
