//! Imagery tiles around substation coordinates.
//!
//! Each site becomes a square of roughly 150 m on a side, requested from a
//! [`TileProvider`] at progressively smaller pixel sizes until one is
//! accepted, and stored in a checksummed on-disk [`TileCache`].

mod bounds;
mod cache;
mod provider;
mod sites;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{square_bounds, GeoBounds, DEFAULT_SIDE_M, MAX_ABS_LATITUDE, METERS_PER_DEGREE};
pub use cache::{sha256_hex, CacheStatus, FetchParams, TileCache, TileMeta};
pub use provider::{DirectoryProvider, HttpProvider, ProviderError, TileProvider, TileRequest, TOKEN_ENV};
pub use sites::{load_sites, load_sites_from_reader, RejectedRow, SiteColumns, SiteLoad, SitePoint};

/// Pixel sizes tried in order.
pub const DEFAULT_CANDIDATES: [u32; 3] = [4096, 3072, 2048];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub px: u32,
    pub cause: String,
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("site file has no rows")]
    EmptyFile,
    #[error("site id `{site_id}` appears on lines {first_line} and {second_line}")]
    DuplicateId { site_id: String, first_line: u64, second_line: u64 },
    #[error("latitude {0} too close to a pole")]
    PolarLatitude(f64),
    #[error("side length {0} m must be positive")]
    BadSide(f64),
    #[error("candidate sizes must be nonempty and strictly decreasing: {0:?}")]
    BadCandidates(Vec<u32>),
    #[error("all {} candidate sizes failed: {}", attempts.len(), describe(attempts))]
    AllCandidatesFailed { attempts: Vec<Attempt> },
    #[error("provider failed: {}", describe(attempts))]
    ProviderFailed { attempts: Vec<Attempt> },
    #[error("provider returned undecodable bytes at {px} px: {reason}")]
    DecodeError { px: u32, reason: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Io(String),
}

fn describe(attempts: &[Attempt]) -> String {
    attempts.iter().map(|a| format!("{} px: {}", a.px, a.cause)).collect::<Vec<_>>().join("; ")
}

/// A fetched tile with its raw provider payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TileAsset {
    pub site_id: String,
    pub bounds: GeoBounds,
    pub px: u32,
    pub side_m: f64,
    pub image: RgbImage,
    pub payload: Vec<u8>,
    /// Meters per requested pixel, `side_m / px`.
    pub ground_resolution: f64,
    pub fetched_at: u64,
    pub provider_name: String,
    pub attempts: usize,
}

pub(crate) fn decode(bytes: &[u8]) -> Result<RgbImage, image::ImageError> {
    image::load_from_memory(bytes).map(|i| i.to_rgb8())
}

/// Requests the tile at each candidate size in order and returns the first
/// accepted one. Only size-limit rejections move on to the next candidate.
pub fn fetch_tile(
    provider: &dyn TileProvider,
    site_id: &str,
    bounds: &GeoBounds,
    side_m: f64,
    candidates: &[u32],
) -> Result<TileAsset, GeoError> {
    if candidates.is_empty() || candidates.windows(2).any(|w| w[0] <= w[1]) || candidates.contains(&0) {
        return Err(GeoError::BadCandidates(candidates.to_vec()));
    }
    let mut attempts = Vec::new();
    for &px in candidates {
        let req = TileRequest { site_id: site_id.to_string(), bounds: *bounds, px };
        match provider.fetch(&req) {
            Ok(payload) => {
                let image = decode(&payload).map_err(|e| GeoError::DecodeError { px, reason: e.to_string() })?;
                return Ok(TileAsset {
                    site_id: site_id.to_string(),
                    bounds: *bounds,
                    px,
                    side_m,
                    image,
                    payload,
                    ground_resolution: side_m / px as f64,
                    fetched_at: cache::unix_now(),
                    provider_name: provider.name().to_string(),
                    attempts: attempts.len() + 1,
                });
            }
            Err(ProviderError::TooLarge(cause)) => attempts.push(Attempt { px, cause }),
            Err(ProviderError::Failed(cause)) => {
                attempts.push(Attempt { px, cause });
                return Err(GeoError::ProviderFailed { attempts });
            }
        }
    }
    Err(GeoError::AllCandidatesFailed { attempts })
}

#[derive(Debug)]
pub struct SiteFetch {
    pub site_id: String,
    pub outcome: Result<(TileAsset, CacheStatus), GeoError>,
}

/// Fetches every site through the cache with at most `jobs` requests in
/// flight. Results keep the input order.
pub fn fetch_all(
    provider: &dyn TileProvider,
    cache: &TileCache,
    sites: &[SitePoint],
    params: &FetchParams,
    jobs: usize,
) -> Vec<SiteFetch> {
    let run = || {
        sites
            .par_iter()
            .map(|s| SiteFetch { site_id: s.site_id.clone(), outcome: cache.get_or_fetch(provider, s, params) })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Per-site fetch summary written next to the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileIndexEntry {
    pub site_id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_status: Option<CacheStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub px: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_resolution: Option<f64>,
    /// Cached payload, relative to the index file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<std::path::PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TileIndex {
    pub provider: String,
    pub params: Option<FetchParams>,
    pub tiles: Vec<TileIndexEntry>,
    pub rejected_rows: Vec<RejectedRow>,
}

impl TileIndex {
    pub const FILE_NAME: &'static str = "tiles.json";

    pub fn from_fetches(
        provider: &str,
        cache: &TileCache,
        index_dir: &std::path::Path,
        params: &FetchParams,
        fetches: &[SiteFetch],
        rejected_rows: Vec<RejectedRow>,
    ) -> Self {
        let tiles = fetches
            .iter()
            .map(|f| match &f.outcome {
                Ok((asset, status)) => {
                    let key = TileCache::key(&f.site_id, params, provider);
                    let (img, _) = cache.paths(&f.site_id, &key);
                    let rel = img.strip_prefix(index_dir).map(|p| p.to_path_buf()).unwrap_or(img);
                    TileIndexEntry {
                        site_id: f.site_id.clone(),
                        ok: true,
                        cache_status: Some(*status),
                        px: Some(asset.px),
                        ground_resolution: Some(asset.ground_resolution),
                        image: Some(rel),
                        error: None,
                    }
                }
                Err(e) => TileIndexEntry {
                    site_id: f.site_id.clone(),
                    ok: false,
                    cache_status: None,
                    px: None,
                    ground_resolution: None,
                    image: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        Self { provider: provider.to_string(), params: Some(params.clone()), tiles, rejected_rows }
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<(), GeoError> {
        let path = dir.join(Self::FILE_NAME);
        let text = serde_json::to_string_pretty(self).expect("index serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(dir: &std::path::Path) -> Result<Self, GeoError> {
        let path = dir.join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))
    }
}
