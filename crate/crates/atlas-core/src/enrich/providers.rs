//! Provider traits, payload validation, and the offline fixture providers.

use std::collections::HashMap;
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{valid_cve_id, CveEntry, GeoRecord, ScanRecord, Severity};

/// Failure talking to a provider. Transport errors are retryable; data
/// errors mean the payload itself was unusable.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider data: {0}")]
    Data(String),
}

/// Outcome of a single lookup. `NotFound` (the provider has no data) is
/// distinct from a retryable transport failure.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LookupError {
    #[error("address not known to provider")]
    NotFound,
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider data: {0}")]
    InvalidData(String),
}

/// Unvalidated geolocation payload as a provider reports it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGeo {
    pub country: String,
    pub city: Option<String>,
    pub asn: Option<u32>,
    pub latitude: f64,
    pub longitude: f64,
}

/// Severity as a provider reports it: a qualitative label, a numeric CVSS
/// score, or nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum SeverityInput {
    Label(String),
    Cvss(f64),
    Missing,
}

/// Unvalidated scan payload as a provider reports it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawScan {
    pub open_ports: Vec<u32>,
    pub cves: Vec<(String, SeverityInput)>,
    pub device_type: Option<String>,
}

pub trait GeoProvider: Sync {
    fn provider_id(&self) -> &str;
    fn fetch_geo(&self, address: Ipv4Addr) -> Result<Option<RawGeo>, ProviderError>;
    /// Metered providers burn quota and go through the rate limiter;
    /// fixtures are free.
    fn metered(&self) -> bool {
        true
    }
}

pub trait ScanProvider: Sync {
    fn provider_id(&self) -> &str;
    fn fetch_scan(&self, address: Ipv4Addr) -> Result<Option<RawScan>, ProviderError>;
    fn metered(&self) -> bool {
        true
    }
}

pub(crate) fn validate_geo(
    address: Ipv4Addr,
    raw: RawGeo,
    provider_id: &str,
    fetched_at: u64,
) -> Result<GeoRecord, String> {
    if raw.country.len() != 2 || !raw.country.bytes().all(|b| b.is_ascii_uppercase()) {
        return Err(format!("country {:?} is not ISO-3166 alpha-2", raw.country));
    }
    if !(-90.0..=90.0).contains(&raw.latitude) {
        return Err(format!("latitude {} outside [-90, 90]", raw.latitude));
    }
    if !(-180.0..=180.0).contains(&raw.longitude) {
        return Err(format!("longitude {} outside [-180, 180]", raw.longitude));
    }
    Ok(GeoRecord {
        address,
        country: raw.country,
        city: raw.city.filter(|c| !c.is_empty()),
        asn: raw.asn,
        latitude: raw.latitude,
        longitude: raw.longitude,
        provider_id: provider_id.to_string(),
        fetched_at,
    })
}

pub(crate) fn validate_scan(
    address: Ipv4Addr,
    raw: RawScan,
    provider_id: &str,
    fetched_at: u64,
) -> Result<ScanRecord, String> {
    let mut open_ports = std::collections::BTreeSet::new();
    for port in raw.open_ports {
        let port = u16::try_from(port).map_err(|_| format!("port {port} outside 0..=65535"))?;
        open_ports.insert(port);
    }
    let mut cves = Vec::new();
    for (id, severity) in raw.cves {
        if !valid_cve_id(&id) {
            return Err(format!("malformed CVE id {id:?}"));
        }
        let severity = match severity {
            SeverityInput::Label(label) => Severity::parse_label(&label)
                .ok_or_else(|| format!("unknown severity label {label:?}"))?,
            SeverityInput::Cvss(score) => Severity::from_cvss(score),
            SeverityInput::Missing => Severity::Unknown,
        };
        cves.push(CveEntry { id, severity });
    }
    cves.sort_by(|a, b| a.id.cmp(&b.id));
    // Device labels come through verbatim apart from trim+lowercase.
    let device_type = raw
        .device_type
        .map(|d| d.trim().to_ascii_lowercase())
        .filter(|d| !d.is_empty());
    Ok(ScanRecord {
        address,
        open_ports,
        cves,
        device_type,
        provider_id: provider_id.to_string(),
        fetched_at,
    })
}

/// One validated geolocation lookup.
pub fn lookup_geo(
    address: Ipv4Addr,
    provider: &dyn GeoProvider,
    now_unix: u64,
) -> Result<GeoRecord, LookupError> {
    let raw = match provider.fetch_geo(address) {
        Ok(Some(raw)) => raw,
        Ok(None) => return Err(LookupError::NotFound),
        Err(ProviderError::Transport(msg)) => return Err(LookupError::Transport(msg)),
        Err(ProviderError::Data(msg)) => return Err(LookupError::InvalidData(msg)),
    };
    validate_geo(address, raw, provider.provider_id(), now_unix).map_err(LookupError::InvalidData)
}

/// One validated scan lookup.
pub fn lookup_scan(
    address: Ipv4Addr,
    provider: &dyn ScanProvider,
    now_unix: u64,
) -> Result<ScanRecord, LookupError> {
    let raw = match provider.fetch_scan(address) {
        Ok(Some(raw)) => raw,
        Ok(None) => return Err(LookupError::NotFound),
        Err(ProviderError::Transport(msg)) => return Err(LookupError::Transport(msg)),
        Err(ProviderError::Data(msg)) => return Err(LookupError::InvalidData(msg)),
    };
    validate_scan(address, raw, provider.provider_id(), now_unix).map_err(LookupError::InvalidData)
}

/// Offline geolocation table: CSV with header
/// `address,country,city,asn,lat,lon`. Empty city/asn fields mean absent.
/// Range validation happens at lookup time, so a bad row surfaces as a
/// provider-data error for that address only.
pub struct CsvGeoFixture {
    id: String,
    rows: HashMap<Ipv4Addr, RawGeo>,
}

impl CsvGeoFixture {
    pub fn from_path(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Transport(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<Self, ProviderError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = HashMap::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| ProviderError::Data(e.to_string()))?;
            if record.len() != 6 {
                return Err(ProviderError::Data(format!(
                    "row {}: expected 6 fields, got {}",
                    idx + 2,
                    record.len()
                )));
            }
            let address: Ipv4Addr = record[0]
                .parse()
                .map_err(|_| ProviderError::Data(format!("row {}: bad address", idx + 2)))?;
            let parse_f64 = |s: &str, what: &str| -> Result<f64, ProviderError> {
                s.parse()
                    .map_err(|_| ProviderError::Data(format!("row {}: bad {what}", idx + 2)))
            };
            let asn = if record[3].is_empty() {
                None
            } else {
                Some(record[3].parse().map_err(|_| {
                    ProviderError::Data(format!("row {}: bad asn", idx + 2))
                })?)
            };
            rows.insert(
                address,
                RawGeo {
                    country: record[1].to_string(),
                    city: if record[2].is_empty() {
                        None
                    } else {
                        Some(record[2].to_string())
                    },
                    asn,
                    latitude: parse_f64(&record[4], "latitude")?,
                    longitude: parse_f64(&record[5], "longitude")?,
                },
            );
        }
        Ok(CsvGeoFixture {
            id: "geo-fixture".to_string(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl GeoProvider for CsvGeoFixture {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn fetch_geo(&self, address: Ipv4Addr) -> Result<Option<RawGeo>, ProviderError> {
        Ok(self.rows.get(&address).cloned())
    }

    fn metered(&self) -> bool {
        false
    }
}

/// Wire shape shared by the scan fixture and the live scan adapter.
#[derive(Debug, Deserialize)]
pub(crate) struct ScanWire {
    #[serde(default)]
    pub ports: Vec<u32>,
    #[serde(default)]
    pub cves: Vec<CveWire>,
    #[serde(default)]
    pub device_type: Option<String>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct CveWire {
    pub id: String,
    #[serde(default)]
    pub severity: Option<String>,
    #[serde(default)]
    pub cvss: Option<f64>,
}

impl From<ScanWire> for RawScan {
    fn from(wire: ScanWire) -> Self {
        RawScan {
            open_ports: wire.ports,
            cves: wire
                .cves
                .into_iter()
                .map(|c| {
                    let severity = match (c.severity, c.cvss) {
                        (Some(label), _) => SeverityInput::Label(label),
                        (None, Some(score)) => SeverityInput::Cvss(score),
                        (None, None) => SeverityInput::Missing,
                    };
                    (c.id, severity)
                })
                .collect(),
            device_type: wire.device_type,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ScanFixtureLine {
    address: Ipv4Addr,
    #[serde(flatten)]
    wire: ScanWire,
}

/// Offline scan table: one JSON object per line with `address`, `ports`,
/// `cves` (each `{id, severity|cvss}`), and optional `device_type`.
pub struct JsonlScanFixture {
    id: String,
    rows: HashMap<Ipv4Addr, RawScan>,
}

impl JsonlScanFixture {
    pub fn from_path(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Transport(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ProviderError> {
        let mut rows = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ScanFixtureLine = serde_json::from_str(line)
                .map_err(|e| ProviderError::Data(format!("line {}: {e}", idx + 1)))?;
            rows.insert(parsed.address, RawScan::from(parsed.wire));
        }
        Ok(JsonlScanFixture {
            id: "scan-fixture".to_string(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All addresses the fixture knows about, ascending. Lets callers
    /// pre-enrich whatever scan coverage exists inside a masked scope.
    pub fn addresses(&self) -> Vec<Ipv4Addr> {
        let mut addrs: Vec<Ipv4Addr> = self.rows.keys().copied().collect();
        addrs.sort();
        addrs
    }
}

impl ScanProvider for JsonlScanFixture {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn fetch_scan(&self, address: Ipv4Addr) -> Result<Option<RawScan>, ProviderError> {
        Ok(self.rows.get(&address).cloned())
    }

    fn metered(&self) -> bool {
        false
    }
}
