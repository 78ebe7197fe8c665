//! EDGAR download with an on-disk cache and a global request rate limit.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use itemseg_core::ingest::FilingRef;
use thiserror::Error;

use crate::jsonl::atomic_write;

pub const DEFAULT_BASE_URL: &str = "https://www.sec.gov/Archives";
pub const DEFAULT_RATE_LIMIT: f64 = 8.0;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("HTTP {status} for {url}")]
    Http { status: u16, url: String },
    #[error("network error for {url}: {message}")]
    Network { url: String, message: String },
    #[error("cache file {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
    #[error("invalid fetch configuration: {0}")]
    Config(String),
}

impl FetchError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, FetchError::Http { .. } | FetchError::Network { .. })
    }
}

/// Performs one GET request.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, user_agent: &str) -> Result<Vec<u8>, FetchError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| FetchError::Config(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str, user_agent: &str) -> Result<Vec<u8>, FetchError> {
        let network = |e: reqwest::Error| FetchError::Network {
            url: url.to_string(),
            message: e.to_string(),
        };
        let resp = self
            .client
            .get(url)
            .header(reqwest::header::USER_AGENT, user_agent)
            .send()
            .map_err(network)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(FetchError::Http {
                status: status.as_u16(),
                url: url.to_string(),
            });
        }
        Ok(resp.bytes().map_err(network)?.to_vec())
    }
}

/// Spaces requests at least `1 / per_second` apart across all threads.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let slot = match *next {
            Some(t) if t > now => {
                thread::sleep(t - now);
                t
            }
            _ => now,
        };
        *next = Some(slot + self.interval);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgarConfig {
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub rate_limit: f64,
    pub user_agent: String,
}

pub struct EdgarClient<T> {
    config: EdgarConfig,
    transport: T,
    limiter: RateLimiter,
}

/// Cache file name for an archive path: separators become `_`.
pub fn cache_file_name(archive_path: &str) -> String {
    archive_path.trim_start_matches('/').replace(['/', '\\'], "_")
}

impl<T: Transport> EdgarClient<T> {
    pub fn new(config: EdgarConfig, transport: T) -> Result<Self, FetchError> {
        if config.user_agent.trim().is_empty() {
            return Err(FetchError::Config("a User-Agent string is required".into()));
        }
        if !(config.rate_limit > 0.0 && config.rate_limit.is_finite()) {
            return Err(FetchError::Config(format!(
                "rate limit must be positive, got {}",
                config.rate_limit
            )));
        }
        let limiter = RateLimiter::new(config.rate_limit);
        Ok(EdgarClient {
            config,
            transport,
            limiter,
        })
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn cache_path(&self, archive_path: &str) -> PathBuf {
        self.config.cache_dir.join(cache_file_name(archive_path))
    }

    pub fn url(&self, archive_path: &str) -> String {
        format!(
            "{}/{}",
            self.config.base_url.trim_end_matches('/'),
            archive_path.trim_start_matches('/')
        )
    }

    /// Returns the cached bytes, downloading and caching them on a miss.
    pub fn fetch_path(&self, archive_path: &str) -> Result<Vec<u8>, FetchError> {
        let path = self.cache_path(archive_path);
        let cache_err = |path: &Path, source| FetchError::Cache {
            path: path.to_path_buf(),
            source,
        };
        match std::fs::read(&path) {
            Ok(bytes) => return Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(cache_err(&path, e)),
        }
        self.limiter.acquire();
        let url = self.url(archive_path);
        log::info!("GET {url}");
        let bytes = self.transport.get(&url, &self.config.user_agent)?;
        atomic_write(&path, &bytes).map_err(|e| cache_err(&path, e))?;
        Ok(bytes)
    }

    pub fn fetch_filing(&self, filing: &FilingRef) -> Result<Vec<u8>, FetchError> {
        self.fetch_path(&filing.path)
    }

    /// The quarterly `master.idx`, decoded as UTF-8 or else Latin-1.
    pub fn fetch_master_index(&self, year: u16, quarter: u8) -> Result<String, FetchError> {
        if !(1..=4).contains(&quarter) {
            return Err(FetchError::Config(format!("quarter must be 1-4, got {quarter}")));
        }
        let bytes = self.fetch_path(&format!("edgar/full-index/{year}/QTR{quarter}/master.idx"))?;
        Ok(decode_text(bytes))
    }
}

pub fn decode_text(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).unwrap_or_else(|e| e.into_bytes().iter().map(|&b| b as char).collect())
}
