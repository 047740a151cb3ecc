//! Seeded train/val/test split of a synthetic image list.

use gridsight::model::{split_dataset, ClassList, ImageRecord, Split, SplitRatios};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records: Vec<ImageRecord> =
        (0..250).map(|i| ImageRecord::new(format!("img{i:04}"), format!("img{i:04}.png"), 640, 640)).collect();
    let manifest = split_dataset(records, ClassList::canonical(), SplitRatios::DEFAULT, 42)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("{split:?}: {}", manifest.count(split));
    }
    let first_val = manifest.in_split(Split::Val).next().unwrap();
    println!("first val image: {}", first_val.id);
    Ok(())
}
