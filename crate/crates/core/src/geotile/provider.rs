use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use log::debug;
use thiserror::Error;

use super::GeoBounds;

pub const TOKEN_ENV: &str = "GRIDSIGHT_PROVIDER_TOKEN";

#[derive(Debug, Clone, PartialEq)]
pub struct TileRequest {
    pub site_id: String,
    pub bounds: GeoBounds,
    pub px: u32,
}

/// Provider failures. Only `TooLarge` lets the caller retry at a smaller
/// pixel size.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("request too large: {0}")]
    TooLarge(String),
    #[error("{0}")]
    Failed(String),
}

pub trait TileProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Raw encoded image bytes for the request.
    fn fetch(&self, req: &TileRequest) -> Result<Vec<u8>, ProviderError>;
}

/// Serves `<root>/<site_id>.<ext>` files, optionally refusing pixel sizes
/// above `max_px` with [`ProviderError::TooLarge`]. Intended for offline
/// runs and tests.
#[derive(Debug)]
pub struct DirectoryProvider {
    root: PathBuf,
    max_px: Option<u32>,
    requests: AtomicUsize,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

impl DirectoryProvider {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), max_px: None, requests: AtomicUsize::new(0) }
    }

    pub fn with_max_px(mut self, max_px: u32) -> Self {
        self.max_px = Some(max_px);
        self
    }

    /// Number of `fetch` calls served so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl TileProvider for DirectoryProvider {
    fn name(&self) -> &str {
        "directory"
    }

    fn fetch(&self, req: &TileRequest) -> Result<Vec<u8>, ProviderError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if let Some(max) = self.max_px {
            if req.px > max {
                return Err(ProviderError::TooLarge(format!("{} px exceeds limit of {max} px", req.px)));
            }
        }
        for ext in IMAGE_EXTENSIONS {
            let path = self.root.join(format!("{}.{ext}", req.site_id));
            if path.is_file() {
                return fs::read(&path).map_err(|e| ProviderError::Failed(format!("{}: {e}", path.display())));
            }
        }
        Err(ProviderError::Failed(format!("no image for site `{}` in {}", req.site_id, self.root.display())))
    }
}

/// Generic bounds-request HTTP provider.
///
/// The URL template may use `{lat_min}`, `{lat_max}`, `{lon_min}`,
/// `{lon_max}`, `{px}` and `{site_id}`. Responses with a status in
/// `too_large_statuses`, or whose body mentions one of
/// `too_large_markers`, are reported as [`ProviderError::TooLarge`].
#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub name: String,
    pub url_template: String,
    /// Header name and full value, e.g. `("Authorization", "Bearer ...")`.
    pub auth_header: Option<(String, String)>,
    pub too_large_statuses: Vec<u16>,
    pub too_large_markers: Vec<String>,
    pub timeout: Duration,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(name: impl Into<String>, url_template: impl Into<String>) -> Result<Self, ProviderError> {
        let timeout = Duration::from_secs(120);
        Ok(Self {
            name: name.into(),
            url_template: url_template.into(),
            auth_header: None,
            too_large_statuses: vec![413],
            too_large_markers: vec!["too large".into(), "size limit".into(), "must be less than or equal to".into()],
            timeout,
            client: Self::client(timeout)?,
        })
    }

    fn client(timeout: Duration) -> Result<reqwest::blocking::Client, ProviderError> {
        reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Failed(format!("building HTTP client: {e}")))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, ProviderError> {
        self.timeout = timeout;
        self.client = Self::client(timeout)?;
        Ok(self)
    }

    /// Sends `Authorization: Bearer <token>` using the token from
    /// `GRIDSIGHT_PROVIDER_TOKEN`, when set.
    pub fn with_env_token(mut self) -> Self {
        if let Ok(token) = std::env::var(TOKEN_ENV) {
            if !token.is_empty() {
                self.auth_header = Some(("Authorization".into(), format!("Bearer {token}")));
            }
        }
        self
    }

    pub fn url_for(&self, req: &TileRequest) -> String {
        let b = &req.bounds;
        self.url_template
            .replace("{lat_min}", &b.lat_min.to_string())
            .replace("{lat_max}", &b.lat_max.to_string())
            .replace("{lon_min}", &b.lon_min.to_string())
            .replace("{lon_max}", &b.lon_max.to_string())
            .replace("{px}", &req.px.to_string())
            .replace("{site_id}", &req.site_id)
    }
}

impl TileProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn fetch(&self, req: &TileRequest) -> Result<Vec<u8>, ProviderError> {
        let url = self.url_for(req);
        debug!("GET {url}");
        let mut builder = self.client.get(&url);
        if let Some((k, v)) = &self.auth_header {
            builder = builder.header(k.as_str(), v.as_str());
        }
        let resp = builder.send().map_err(|e| ProviderError::Failed(format!("request failed: {e}")))?;
        let status = resp.status();
        let body = resp.bytes().map_err(|e| ProviderError::Failed(format!("reading body: {e}")))?.to_vec();
        if status.is_success() {
            return Ok(body);
        }
        let text = String::from_utf8_lossy(&body);
        let snippet: String = text.chars().take(200).collect();
        let lower = text.to_lowercase();
        if self.too_large_statuses.contains(&status.as_u16())
            || self.too_large_markers.iter().any(|m| lower.contains(&m.to_lowercase()))
        {
            Err(ProviderError::TooLarge(format!("HTTP {status}: {snippet}")))
        } else {
            Err(ProviderError::Failed(format!("HTTP {status}: {snippet}")))
        }
    }
}
