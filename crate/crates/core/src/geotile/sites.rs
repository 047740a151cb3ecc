use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GeoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePoint {
    pub site_id: String,
    pub lat: f64,
    pub lon: f64,
}

impl SitePoint {
    pub fn new(site_id: impl Into<String>, lat: f64, lon: f64) -> Result<Self, String> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(format!("latitude {lat} outside [-90, 90]"));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(format!("longitude {lon} outside [-180, 180]"));
        }
        let site_id = site_id.into();
        if site_id.trim().is_empty() {
            return Err("empty site id".into());
        }
        Ok(Self { site_id, lat, lon })
    }
}

/// Header names for the id, latitude and longitude columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteColumns {
    pub id: String,
    pub lat: String,
    pub lon: String,
}

impl Default for SiteColumns {
    fn default() -> Self {
        Self { id: "site_id".into(), lat: "lat".into(), lon: "lon".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteLoad {
    pub sites: Vec<SitePoint>,
    pub rejected: Vec<RejectedRow>,
}

/// Reads site coordinates from CSV. Rows with unparseable or out-of-range
/// coordinates are collected in `rejected`; a repeated site id is an error.
pub fn load_sites_from_reader<R: std::io::Read>(reader: R, columns: &SiteColumns) -> Result<SiteLoad, GeoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| GeoError::Csv(e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(GeoError::EmptyFile);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| GeoError::MissingColumn(name.to_string()))
    };
    let (id_col, lat_col, lon_col) = (find(&columns.id)?, find(&columns.lat)?, find(&columns.lon)?);

    let mut out = SiteLoad::default();
    let mut first_line: HashMap<String, u64> = HashMap::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.rejected.push(RejectedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let parsed = (|| {
            let lat: f64 = field(lat_col).parse().map_err(|_| format!("bad latitude `{}`", field(lat_col)))?;
            let lon: f64 = field(lon_col).parse().map_err(|_| format!("bad longitude `{}`", field(lon_col)))?;
            SitePoint::new(field(id_col), lat, lon)
        })();
        match parsed {
            Ok(site) => {
                if let Some(&first) = first_line.get(&site.site_id) {
                    return Err(GeoError::DuplicateId { site_id: site.site_id, first_line: first, second_line: line });
                }
                first_line.insert(site.site_id.clone(), line);
                out.sites.push(site);
            }
            Err(reason) => out.rejected.push(RejectedRow { line, reason }),
        }
    }
    if rows == 0 {
        return Err(GeoError::EmptyFile);
    }
    Ok(out)
}

pub fn load_sites(path: &Path, columns: &SiteColumns) -> Result<SiteLoad, GeoError> {
    let file = std::fs::File::open(path).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
    load_sites_from_reader(file, columns)
}
