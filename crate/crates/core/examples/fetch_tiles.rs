//! Tile acquisition from a local directory provider that rejects anything
//! above 2048 px, so the size fallback kicks in. A second pass hits the
//! cache.

use std::fs;

use gridsight::geotile::{square_bounds, DirectoryProvider, FetchParams, SitePoint, TileCache};
use image::{Rgb, RgbImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let tiles = dir.path().join("provider");
    fs::create_dir_all(&tiles)?;
    RgbImage::from_pixel(32, 32, Rgb([90, 110, 70])).save(tiles.join("TX-001.png"))?;

    let site = SitePoint::new("TX-001", 31.97, -99.90)?;
    let bounds = square_bounds(&site, 150.0)?;
    println!(
        "bounds lat [{:.6}, {:.6}] lon [{:.6}, {:.6}]",
        bounds.lat_min, bounds.lat_max, bounds.lon_min, bounds.lon_max
    );

    let provider = DirectoryProvider::new(&tiles).with_max_px(2048);
    let cache = TileCache::new(dir.path().join("cache"));
    let params = FetchParams::default();
    let (tile, status) = cache.get_or_fetch(&provider, &site, &params)?;
    println!("{status:?}: {} px after {} attempts, {:.4} m/px", tile.px, tile.attempts, tile.ground_resolution);
    let (_, status) = cache.get_or_fetch(&provider, &site, &params)?;
    println!("{status:?}: provider requests so far {}", provider.requests());
    Ok(())
}
