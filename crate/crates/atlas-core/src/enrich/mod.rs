//! Per-IP enrichment: geolocation/ASN and internet-scan intelligence.
//!
//! Providers are pluggable behind the [`GeoProvider`] / [`ScanProvider`]
//! traits. CSV and JSONL fixture providers make the whole pipeline runnable
//! offline and deterministic; live HTTP adapters exist behind the `live`
//! feature and are configured from `GEO_PROVIDER_URL`/`GEO_PROVIDER_KEY`
//! and `SCAN_PROVIDER_URL`/`SCAN_PROVIDER_KEY`.
//!
//! [`enrich_batch`] is cache-first: fresh store entries are never
//! re-fetched, outbound calls to metered providers respect a token-bucket
//! rate limit, and individual failures are recorded per address without
//! aborting the batch.

mod batch;
#[cfg(feature = "live")]
mod live;
mod providers;
mod rate;
mod store;

pub use batch::{enrich_batch, BatchOptions, BatchReport, SideCounts};
#[cfg(feature = "live")]
pub use live::{HttpGeoProvider, HttpScanProvider};
pub use providers::{
    lookup_geo, lookup_scan, CsvGeoFixture, GeoProvider, JsonlScanFixture, LookupError,
    ProviderError, RawGeo, RawScan, ScanProvider, SeverityInput,
};
pub use rate::RateLimiter;
pub use store::{EnrichmentStore, StoreError};

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

/// Default cache TTL: 30 days. Scan data rots slowly and live quota is
/// expensive.
pub const DEFAULT_TTL_SECS: u64 = 30 * 24 * 60 * 60;

/// Default provider budget: 1 request/second.
pub const DEFAULT_RATE_PER_SEC: f64 = 1.0;

/// NVD-style qualitative severity buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
    Unknown,
}

impl Severity {
    /// Buckets a numeric CVSS score: 0-3.9 low, 4-6.9 medium, 7-8.9 high,
    /// 9-10 critical; anything else unknown.
    pub fn from_cvss(score: f64) -> Severity {
        if !(0.0..=10.0).contains(&score) {
            Severity::Unknown
        } else if score < 4.0 {
            Severity::Low
        } else if score < 7.0 {
            Severity::Medium
        } else if score < 9.0 {
            Severity::High
        } else {
            Severity::Critical
        }
    }

    pub fn parse_label(label: &str) -> Option<Severity> {
        match label.to_ascii_lowercase().as_str() {
            "low" => Some(Severity::Low),
            "medium" => Some(Severity::Medium),
            "high" => Some(Severity::High),
            "critical" => Some(Severity::Critical),
            "unknown" => Some(Severity::Unknown),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
            Severity::Unknown => "unknown",
        }
    }
}

/// One vulnerability identifier with its severity bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveEntry {
    pub id: String,
    pub severity: Severity,
}

/// True for identifiers shaped `CVE-<year>-<number>`.
pub fn valid_cve_id(id: &str) -> bool {
    let rest = match id.strip_prefix("CVE-") {
        Some(r) => r,
        None => return false,
    };
    let (year, number) = match rest.split_once('-') {
        Some(parts) => parts,
        None => return false,
    };
    year.len() == 4
        && year.bytes().all(|b| b.is_ascii_digit())
        && !number.is_empty()
        && number.bytes().all(|b| b.is_ascii_digit())
}

/// Geolocation and ASN data for one address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRecord {
    pub address: Ipv4Addr,
    /// ISO-3166 alpha-2, uppercase.
    pub country: String,
    pub city: Option<String>,
    pub asn: Option<u32>,
    pub latitude: f64,
    pub longitude: f64,
    pub provider_id: String,
    pub fetched_at: u64,
}

/// Internet-scan intelligence for one address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub address: Ipv4Addr,
    pub open_ports: BTreeSet<u16>,
    pub cves: Vec<CveEntry>,
    pub device_type: Option<String>,
    pub provider_id: String,
    pub fetched_at: u64,
}

/// Outcome of the most recent provider interaction for one side of an
/// entry. Records themselves hold the best-known data: a stale or
/// not-found status does not erase a previously cached record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Fresh,
    Stale,
    NotFound,
    Error,
}

/// Cached enrichment state for one address.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub geo: Option<GeoRecord>,
    pub geo_status: Option<EntryStatus>,
    pub scan: Option<ScanRecord>,
    pub scan_status: Option<EntryStatus>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cvss_buckets_match_nvd_convention() {
        assert_eq!(Severity::from_cvss(0.0), Severity::Low);
        assert_eq!(Severity::from_cvss(3.9), Severity::Low);
        assert_eq!(Severity::from_cvss(4.0), Severity::Medium);
        assert_eq!(Severity::from_cvss(6.9), Severity::Medium);
        assert_eq!(Severity::from_cvss(7.0), Severity::High);
        assert_eq!(Severity::from_cvss(8.9), Severity::High);
        assert_eq!(Severity::from_cvss(9.0), Severity::Critical);
        assert_eq!(Severity::from_cvss(10.0), Severity::Critical);
        assert_eq!(Severity::from_cvss(-1.0), Severity::Unknown);
        assert_eq!(Severity::from_cvss(11.0), Severity::Unknown);
    }

    #[test]
    fn cve_id_pattern() {
        assert!(valid_cve_id("CVE-2014-1692"));
        assert!(valid_cve_id("CVE-2021-44228"));
        assert!(!valid_cve_id("CVE-XYZ"));
        assert!(!valid_cve_id("CVE-20-1692"));
        assert!(!valid_cve_id("cve-2014-1692"));
        assert!(!valid_cve_id("CVE-2014-"));
    }
}
