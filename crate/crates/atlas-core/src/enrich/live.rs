//! Live HTTP provider adapters (feature `live`).
//!
//! Both adapters speak a minimal JSON dialect: `GET {base}/{address}` with
//! an optional bearer key. 404 means the provider has no data; any other
//! non-success status is a transport error. Endpoints and keys come from
//! `GEO_PROVIDER_URL`/`GEO_PROVIDER_KEY` and `SCAN_PROVIDER_URL`/
//! `SCAN_PROVIDER_KEY` — secrets never live in config files.

use std::net::Ipv4Addr;
use std::time::Duration;

use serde::Deserialize;

use super::providers::{GeoProvider, ProviderError, RawGeo, RawScan, ScanProvider, ScanWire};

fn build_client() -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(20))
        .build()
        .map_err(|e| ProviderError::Transport(e.to_string()))
}

fn get_json<T: serde::de::DeserializeOwned>(
    client: &reqwest::blocking::Client,
    base_url: &str,
    key: Option<&str>,
    address: Ipv4Addr,
) -> Result<Option<T>, ProviderError> {
    let url = format!("{}/{}", base_url.trim_end_matches('/'), address);
    let mut req = client.get(&url);
    if let Some(key) = key {
        req = req.bearer_auth(key);
    }
    let resp = req
        .send()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    if resp.status() == reqwest::StatusCode::NOT_FOUND {
        return Ok(None);
    }
    if !resp.status().is_success() {
        return Err(ProviderError::Transport(format!(
            "{url}: status {}",
            resp.status()
        )));
    }
    resp.json::<T>()
        .map(Some)
        .map_err(|e| ProviderError::Data(e.to_string()))
}

#[derive(Deserialize)]
struct GeoWire {
    country: String,
    #[serde(default)]
    city: Option<String>,
    #[serde(default)]
    asn: Option<u32>,
    latitude: f64,
    longitude: f64,
}

pub struct HttpGeoProvider {
    base_url: String,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpGeoProvider {
    pub fn new(base_url: String, key: Option<String>) -> Result<Self, ProviderError> {
        Ok(HttpGeoProvider {
            base_url,
            key,
            client: build_client()?,
        })
    }

    /// Builds from `GEO_PROVIDER_URL` / `GEO_PROVIDER_KEY`, or `None` when
    /// no endpoint is configured.
    pub fn from_env() -> Result<Option<Self>, ProviderError> {
        match std::env::var("GEO_PROVIDER_URL") {
            Ok(url) if !url.is_empty() => {
                let key = std::env::var("GEO_PROVIDER_KEY").ok().filter(|k| !k.is_empty());
                Self::new(url, key).map(Some)
            }
            _ => Ok(None),
        }
    }
}

impl GeoProvider for HttpGeoProvider {
    fn provider_id(&self) -> &str {
        "geo-live"
    }

    fn fetch_geo(&self, address: Ipv4Addr) -> Result<Option<RawGeo>, ProviderError> {
        let wire: Option<GeoWire> =
            get_json(&self.client, &self.base_url, self.key.as_deref(), address)?;
        Ok(wire.map(|w| RawGeo {
            country: w.country,
            city: w.city,
            asn: w.asn,
            latitude: w.latitude,
            longitude: w.longitude,
        }))
    }
}

pub struct HttpScanProvider {
    base_url: String,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpScanProvider {
    pub fn new(base_url: String, key: Option<String>) -> Result<Self, ProviderError> {
        Ok(HttpScanProvider {
            base_url,
            key,
            client: build_client()?,
        })
    }

    /// Builds from `SCAN_PROVIDER_URL` / `SCAN_PROVIDER_KEY`, or `None`
    /// when no endpoint is configured.
    pub fn from_env() -> Result<Option<Self>, ProviderError> {
        match std::env::var("SCAN_PROVIDER_URL") {
            Ok(url) if !url.is_empty() => {
                let key = std::env::var("SCAN_PROVIDER_KEY").ok().filter(|k| !k.is_empty());
                Self::new(url, key).map(Some)
            }
            _ => Ok(None),
        }
    }
}

impl ScanProvider for HttpScanProvider {
    fn provider_id(&self) -> &str {
        "scan-live"
    }

    fn fetch_scan(&self, address: Ipv4Addr) -> Result<Option<RawScan>, ProviderError> {
        let wire: Option<ScanWire> =
            get_json(&self.client, &self.base_url, self.key.as_deref(), address)?;
        Ok(wire.map(RawScan::from))
    }
}
