//! Component census over three sites from precomputed prediction files.

use std::fs;

use gridsight::census::{emit_reports, run_census, Detector};
use gridsight::geotile::SitePoint;
use gridsight::model::ClassList;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let preds = dir.path().join("predictions");
    fs::create_dir_all(&preds)?;
    fs::write(preds.join("A.txt"), "0 0.2 0.2 0.1 0.1 0.9\n1 0.5 0.5 0.1 0.1 0.8\n1 0.6 0.6 0.1 0.1 0.3\n")?;
    fs::write(preds.join("B.txt"), "2 0.4 0.4 0.2 0.2 0.75\n1 0.7 0.2 0.1 0.1 0.55\n")?;
    let sites = vec![
        SitePoint::new("A", 29.76, -95.37)?,
        SitePoint::new("B", 35.47, -97.52)?,
        SitePoint::new("C", 32.78, -96.80)?,
    ];
    let detector = Detector::Precomputed { dir: preds };
    let census = run_census(&detector, &sites, |_| None, &ClassList::canonical(), 0.5, 2)?;
    print!("{}", census.render_summary());
    let files = emit_reports(&census, &sites, &dir.path().join("report"))?;
    print!("{}", fs::read_to_string(files.sites_csv)?);
    Ok(())
}
