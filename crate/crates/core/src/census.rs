//! Per-site and national component counts from detector output.
//!
//! A detector is either a directory of precomputed prediction files named
//! `<site_id>.txt`, or an external command run once per tile. Command
//! arguments may use `{image}` (tile image path) and `{output}` (where the
//! command must write its prediction file). Prediction files use the
//! `class cx cy w h conf` line format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geotile::{SitePoint, TileAsset};
use crate::model::{display_plural, read_prediction_file, ClassList, Detection, LabelFileError};

pub const DEFAULT_CONF_THRESH: f64 = 0.5;
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SITES_CSV: &str = "sites.csv";
pub const SITES_GEOJSON: &str = "sites.geojson";

#[derive(Debug, Error)]
pub enum CensusError {
    #[error("detector failed for site `{site_id}`: {reason}")]
    AdapterFailed { site_id: String, reason: String },
    #[error("no prediction file for site `{site_id}` at {path}")]
    MissingPrediction { site_id: String, path: String },
    #[error(transparent)]
    Parse(#[from] LabelFileError),
    #[error("census references unknown site `{0}`")]
    UnknownSite(String),
    #[error("confidence threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("malformed counts file: {0}")]
    BadCounts(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Detector {
    Precomputed { dir: PathBuf },
    Command { program: String, args: Vec<String>, work_dir: PathBuf },
}

impl Detector {
    pub fn name(&self) -> String {
        match self {
            Detector::Precomputed { dir } => format!("precomputed:{}", dir.display()),
            Detector::Command { program, .. } => format!("command:{program}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDetections {
    pub site_id: String,
    pub detections: Vec<Detection>,
    pub tile_px: u32,
    pub detector_name: String,
}

/// Runs the detector for one site. `image` is needed only by command
/// detectors.
pub fn detect_site(
    detector: &Detector,
    site_id: &str,
    tile_px: u32,
    image: Option<&Path>,
    classes: &ClassList,
) -> Result<SiteDetections, CensusError> {
    let pred_path = match detector {
        Detector::Precomputed { dir } => dir.join(format!("{site_id}.txt")),
        Detector::Command { program, args, work_dir } => {
            let image = image.ok_or_else(|| CensusError::AdapterFailed {
                site_id: site_id.into(),
                reason: "no tile image available".into(),
            })?;
            fs::create_dir_all(work_dir).map_err(|e| CensusError::Io(format!("{}: {e}", work_dir.display())))?;
            let output = work_dir.join(format!("{site_id}.txt"));
            let _ = fs::remove_file(&output);
            let subst = |a: &str| {
                a.replace("{image}", &image.display().to_string())
                    .replace("{output}", &output.display().to_string())
                    .replace("{site_id}", site_id)
            };
            let status = Command::new(program)
                .args(args.iter().map(|a| subst(a)))
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .status()
                .map_err(|e| CensusError::AdapterFailed { site_id: site_id.into(), reason: e.to_string() })?;
            if !status.success() {
                return Err(CensusError::AdapterFailed {
                    site_id: site_id.into(),
                    reason: format!("exit status {}", status.code().map_or("signal".into(), |c| c.to_string())),
                });
            }
            output
        }
    };
    if !pred_path.is_file() {
        return Err(CensusError::MissingPrediction { site_id: site_id.into(), path: pred_path.display().to_string() });
    }
    Ok(SiteDetections {
        site_id: site_id.into(),
        detections: read_prediction_file(&pred_path, classes.len())?,
        tile_px,
        detector_name: detector.name(),
    })
}

/// Runs the detector on a fetched tile. Command detectors receive the tile
/// re-encoded as PNG in their work directory.
pub fn detect(detector: &Detector, tile: &TileAsset, classes: &ClassList) -> Result<SiteDetections, CensusError> {
    let image = match detector {
        Detector::Command { work_dir, .. } => {
            fs::create_dir_all(work_dir).map_err(|e| CensusError::Io(format!("{}: {e}", work_dir.display())))?;
            let path = work_dir.join(format!("{}.png", tile.site_id));
            tile.image.save(&path).map_err(|e| CensusError::Io(format!("{}: {e}", path.display())))?;
            Some(path)
        }
        Detector::Precomputed { .. } => None,
    };
    detect_site(detector, &tile.site_id, tile.px, image.as_deref(), classes)
}

pub type ClassCounts = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCensus {
    pub classes: Vec<String>,
    pub counts: ClassCounts,
    pub per_site: BTreeMap<String, ClassCounts>,
    pub sites_processed: usize,
    pub sites_failed: usize,
    pub failed_site_ids: Vec<String>,
    pub conf_thresh: f64,
}

impl ComponentCensus {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// The national table: one row per class, largest count first.
    pub fn render_summary_table(&self) -> String {
        let mut rows: Vec<(usize, &String, u64)> =
            self.classes.iter().enumerate().map(|(i, c)| (i, c, self.counts.get(c).copied().unwrap_or(0))).collect();
        rows.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
        let mut out = String::from("Component\t# of Components\n");
        for (_, name, n) in rows {
            let _ = writeln!(out, "{}\t{n}", display_plural(name));
        }
        out
    }

    pub fn render_summary(&self) -> String {
        format!(
            "# conf_thresh: {:.2}\n# sites_processed: {}\n# sites_failed: {}\n{}",
            self.conf_thresh,
            self.sites_processed,
            self.sites_failed,
            self.render_summary_table()
        )
    }
}

fn zero_counts(classes: &ClassList) -> ClassCounts {
    classes.iter().map(|c| (c.name.clone(), 0)).collect()
}

/// Counts detections at or above `conf_thresh`. Failed sites are listed
/// but contribute nothing.
pub fn count_components(
    all: &[SiteDetections],
    failed: &[String],
    classes: &ClassList,
    conf_thresh: f64,
) -> Result<ComponentCensus, CensusError> {
    if !(0.0..=1.0).contains(&conf_thresh) {
        return Err(CensusError::BadThreshold(conf_thresh));
    }
    let mut per_site: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for site in all {
        let entry = per_site.entry(site.site_id.clone()).or_insert_with(|| zero_counts(classes));
        for d in site.detections.iter().filter(|d| d.confidence >= conf_thresh) {
            if let Some(name) = classes.name(d.class) {
                *entry.entry(name.to_string()).or_insert(0) += 1;
            }
        }
    }
    ComponentCensus::from_site_counts(classes, per_site, failed.to_vec(), conf_thresh)
}

impl ComponentCensus {
    /// Builds the national totals from per-site counts, e.g. ones read back
    /// with [`read_sites_csv`]. Classes missing from a site count as zero.
    pub fn from_site_counts(
        classes: &ClassList,
        per_site: BTreeMap<String, ClassCounts>,
        failed_site_ids: Vec<String>,
        conf_thresh: f64,
    ) -> Result<Self, CensusError> {
        if !(0.0..=1.0).contains(&conf_thresh) {
            return Err(CensusError::BadThreshold(conf_thresh));
        }
        let mut counts = zero_counts(classes);
        let mut filled = BTreeMap::new();
        for (site, site_counts) in per_site {
            let mut row = zero_counts(classes);
            for (c, n) in site_counts {
                if classes.id_of(&c).is_none() {
                    return Err(CensusError::BadCounts(format!("unknown class `{c}` at site `{site}`")));
                }
                row.insert(c.clone(), n);
                *counts.entry(c).or_insert(0) += n;
            }
            filled.insert(site, row);
        }
        Ok(Self {
            classes: classes.names(),
            counts,
            sites_processed: filled.len(),
            per_site: filled,
            sites_failed: failed_site_ids.len(),
            failed_site_ids,
            conf_thresh,
        })
    }
}

/// Detects every site with at most `jobs` workers. Per-site failures are
/// logged and recorded, never fatal.
pub fn run_census<F>(
    detector: &Detector,
    sites: &[SitePoint],
    tile_for: F,
    classes: &ClassList,
    conf_thresh: f64,
    jobs: usize,
) -> Result<ComponentCensus, CensusError>
where
    F: Fn(&SitePoint) -> Option<(PathBuf, u32)> + Sync,
{
    let run = || {
        sites
            .par_iter()
            .map(|s| {
                let tile = tile_for(s);
                let (image, px) = match &tile {
                    Some((p, px)) => (Some(p.as_path()), *px),
                    None => (None, 0),
                };
                (s.site_id.clone(), detect_site(detector, &s.site_id, px, image, classes))
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(d) => ok.push(d),
            Err(e) => {
                warn!("site `{id}` failed: {e}");
                failed.push(id);
            }
        }
    }
    count_components(&ok, &failed, classes, conf_thresh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub sites_csv: PathBuf,
    pub geojson: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CensusError {
    CensusError::Io(format!("{}: {e}", path.display()))
}

pub fn render_sites_csv(census: &ComponentCensus, sites: &[SitePoint]) -> Result<String, CensusError> {
    check_sites(census, sites)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["site_id".to_string(), "lat".into(), "lon".into()];
    header.extend(census.classes.iter().cloned());
    w.write_record(&header).map_err(|e| CensusError::Io(e.to_string()))?;
    for s in sites.iter().filter(|s| census.per_site.contains_key(&s.site_id)) {
        let counts = &census.per_site[&s.site_id];
        let mut row = vec![s.site_id.clone(), s.lat.to_string(), s.lon.to_string()];
        row.extend(census.classes.iter().map(|c| counts.get(c).copied().unwrap_or(0).to_string()));
        w.write_record(&row).map_err(|e| CensusError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CensusError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_geojson(census: &ComponentCensus, sites: &[SitePoint]) -> Result<String, CensusError> {
    check_sites(census, sites)?;
    let features: Vec<Value> = sites
        .iter()
        .filter(|s| census.per_site.contains_key(&s.site_id))
        .map(|s| {
            let counts = &census.per_site[&s.site_id];
            let mut props = serde_json::Map::new();
            props.insert("site_id".into(), json!(s.site_id));
            for c in &census.classes {
                props.insert(c.clone(), json!(counts.get(c).copied().unwrap_or(0)));
            }
            props.insert("total".into(), json!(counts.values().sum::<u64>()));
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
                "properties": props,
            })
        })
        .collect();
    let doc = json!({
        "type": "FeatureCollection",
        "conf_thresh": census.conf_thresh,
        "features": features,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("geojson serializes") + "\n")
}

fn check_sites(census: &ComponentCensus, sites: &[SitePoint]) -> Result<(), CensusError> {
    for id in census.per_site.keys() {
        if !sites.iter().any(|s| &s.site_id == id) {
            return Err(CensusError::UnknownSite(id.clone()));
        }
    }
    Ok(())
}

/// Writes the summary table, per-site CSV and GeoJSON point features into
/// `out_dir`.
pub fn emit_reports(census: &ComponentCensus, sites: &[SitePoint], out_dir: &Path) -> Result<ReportFiles, CensusError> {
    let csv_text = render_sites_csv(census, sites)?;
    let geojson = render_geojson(census, sites)?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let files = ReportFiles {
        summary: out_dir.join(SUMMARY_FILE),
        sites_csv: out_dir.join(SITES_CSV),
        geojson: out_dir.join(SITES_GEOJSON),
    };
    fs::write(&files.summary, census.render_summary()).map_err(|e| io_err(&files.summary, e))?;
    fs::write(&files.sites_csv, csv_text).map_err(|e| io_err(&files.sites_csv, e))?;
    fs::write(&files.geojson, geojson).map_err(|e| io_err(&files.geojson, e))?;
    Ok(files)
}

/// Reads per-site counts back from a CSV written by [`emit_reports`].
pub fn read_sites_csv(path: &Path) -> Result<BTreeMap<String, ClassCounts>, CensusError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if headers.len() < 3 || &headers[0] != "site_id" {
        return Err(CensusError::BadCounts(format!("unexpected header {headers:?}")));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let mut counts = ClassCounts::new();
        for (name, value) in headers.iter().zip(rec.iter()).skip(3) {
            let n = value.parse().map_err(|_| CensusError::BadCounts(format!("count `{value}` for `{name}`")))?;
            counts.insert(name.to_string(), n);
        }
        out.insert(rec[0].to_string(), counts);
    }
    Ok(out)
}
