use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{decode, fetch_tile, square_bounds, GeoBounds, GeoError, SitePoint, TileAsset, TileProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchParams {
    pub side_m: f64,
    pub candidates: Vec<u32>,
}

impl Default for FetchParams {
    fn default() -> Self {
        Self { side_m: super::DEFAULT_SIDE_M, candidates: super::DEFAULT_CANDIDATES.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Miss,
    /// Cached payload failed its checksum and was fetched again.
    Refetched,
}

/// Sidecar stored next to each cached payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileMeta {
    pub site_id: String,
    pub bounds: GeoBounds,
    pub px: u32,
    pub side_m: f64,
    pub candidates: Vec<u32>,
    pub provider: String,
    pub sha256: String,
    pub fetched_at: u64,
    pub ground_resolution: f64,
    pub attempts: usize,
}

/// On-disk tile store laid out as `<root>/<site_id>/<key>.img` plus a
/// `<key>.json` sidecar.
#[derive(Debug, Clone)]
pub struct TileCache {
    root: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn path_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' }).collect()
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl TileCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key(site_id: &str, params: &FetchParams, provider: &str) -> String {
        let canonical = format!("{site_id}\n{}\n{:?}\n{provider}", params.side_m, params.candidates);
        sha256_hex(canonical.as_bytes())[..32].to_string()
    }

    pub fn paths(&self, site_id: &str, key: &str) -> (PathBuf, PathBuf) {
        let dir = self.root.join(path_safe(site_id));
        (dir.join(format!("{key}.img")), dir.join(format!("{key}.json")))
    }

    fn read(&self, site: &SitePoint, key: &str) -> Result<Option<TileAsset>, String> {
        let (img_path, meta_path) = self.paths(&site.site_id, key);
        if !img_path.exists() || !meta_path.exists() {
            return Ok(None);
        }
        let meta: TileMeta = fs::read_to_string(&meta_path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
            .map_err(|e| format!("unreadable sidecar {}: {e}", meta_path.display()))?;
        let payload = fs::read(&img_path).map_err(|e| format!("{}: {e}", img_path.display()))?;
        if sha256_hex(&payload) != meta.sha256 {
            return Err(format!("checksum mismatch for {}", img_path.display()));
        }
        let image = decode(&payload).map_err(|e| e.to_string())?;
        Ok(Some(TileAsset {
            site_id: meta.site_id,
            bounds: meta.bounds,
            px: meta.px,
            side_m: meta.side_m,
            image,
            payload,
            ground_resolution: meta.ground_resolution,
            fetched_at: meta.fetched_at,
            provider_name: meta.provider,
            attempts: meta.attempts,
        }))
    }

    fn write(&self, asset: &TileAsset, params: &FetchParams, key: &str) -> Result<(), GeoError> {
        let (img_path, meta_path) = self.paths(&asset.site_id, key);
        let dir = img_path.parent().expect("cache paths have a parent");
        fs::create_dir_all(dir).map_err(|e| GeoError::Io(format!("{}: {e}", dir.display())))?;
        let meta = TileMeta {
            site_id: asset.site_id.clone(),
            bounds: asset.bounds,
            px: asset.px,
            side_m: asset.side_m,
            candidates: params.candidates.clone(),
            provider: asset.provider_name.clone(),
            sha256: sha256_hex(&asset.payload),
            fetched_at: asset.fetched_at,
            ground_resolution: asset.ground_resolution,
            attempts: asset.attempts,
        };
        write_atomic(&img_path, &asset.payload).map_err(|e| GeoError::Io(format!("{}: {e}", img_path.display())))?;
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        write_atomic(&meta_path, text.as_bytes()).map_err(|e| GeoError::Io(format!("{}: {e}", meta_path.display())))
    }

    /// Returns the cached tile for this site and parameters, fetching and
    /// storing it on a miss. A corrupt entry is logged and replaced.
    pub fn get_or_fetch(
        &self,
        provider: &dyn TileProvider,
        site: &SitePoint,
        params: &FetchParams,
    ) -> Result<(TileAsset, CacheStatus), GeoError> {
        let key = Self::key(&site.site_id, params, provider.name());
        let status = match self.read(site, &key) {
            Ok(Some(asset)) => return Ok((asset, CacheStatus::Hit)),
            Ok(None) => CacheStatus::Miss,
            Err(reason) => {
                warn!("cache entry for `{}` is corrupt ({reason}); refetching", site.site_id);
                CacheStatus::Refetched
            }
        };
        let bounds = square_bounds(site, params.side_m)?;
        let asset = fetch_tile(provider, &site.site_id, &bounds, params.side_m, &params.candidates)?;
        self.write(&asset, params, &key)?;
        Ok((asset, status))
    }
}
