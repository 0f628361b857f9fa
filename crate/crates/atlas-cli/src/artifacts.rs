//! Output-directory layout, JSON/JSONL/CSV helpers, digests, and the
//! one-stage-at-a-time lock.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use atlas_core::enrich::{EnrichmentStore, EntryStatus, GeoRecord, ScanRecord, StoreEntry};
use atlas_core::extract::EndpointHit;

use crate::error::StageError;

pub const HITS: &str = "hits.jsonl";
pub const EXTRACT_SUMMARY: &str = "extract_summary.json";
pub const ENRICHED: &str = "enriched.jsonl";
pub const ENRICH_SUMMARY: &str = "enrich_summary.json";
pub const CACHE: &str = "cache/enrichment.jsonl";
pub const EDGES: &str = "edges.jsonl";
pub const AFFINITY_SUMMARY: &str = "affinity_summary.json";
pub const OVERLAP_BINS: &str = "overlap_bins.csv";
pub const OVERLAP_PAIRS: &str = "overlap_pairs.csv";
pub const COUNTRIES_DROPZONES: &str = "countries_dropzones.csv";
pub const COUNTRIES_TARGETS: &str = "countries_targets.csv";
pub const FLOW_MAP: &str = "flow_map.geojson";
pub const DISTANCE_HISTOGRAM: &str = "distance_histogram.csv";
pub const GEO_SUMMARY: &str = "geo_summary.json";
pub const PORT_PROFILE_DROPZONES: &str = "port_profile_dropzones.csv";
pub const PORT_PROFILE_TARGETS: &str = "port_profile_targets.csv";
pub const AMPLIFICATION_FLAGS: &str = "amplification_flags.csv";
pub const CVE_DROPZONES: &str = "cve_summary_dropzones.csv";
pub const CVE_TARGETS: &str = "cve_summary_targets.csv";
pub const CLOSURE_RECOMMENDATIONS: &str = "closure_recommendations.csv";
pub const EXPOSURE_SUMMARY: &str = "exposure_summary.json";
pub const SCOPE_BREAKDOWN: &str = "scope_breakdown.csv";
pub const SCOPE_CLUSTERS: &str = "scope_clusters.csv";
pub const SCOPE_RECOMMENDATIONS: &str = "scope_recommendations.csv";
pub const SCOPE_FLAGS: &str = "scope_flags.csv";
pub const NETSCOPE_SUMMARY: &str = "netscope_summary.json";
pub const REPORT_DIR: &str = "report";
pub const REPORT_MANIFEST: &str = "report/manifest.json";
pub const ERROR_DOC: &str = "error.json";

/// Holds `.atlas.lock` inside the out dir for the stage's duration.
pub struct StageLock {
    path: PathBuf,
}

impl StageLock {
    pub fn acquire(out: &Path, stage: &str) -> Result<Self, StageError> {
        fs::create_dir_all(out)?;
        let path = out.join(".atlas.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{stage} pid={}", std::process::id());
                Ok(StageLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(StageError::Dependency(format!(
                    "another stage holds {} (remove the file if it is stale)",
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StageLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| StageError::Other(anyhow::anyhow!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    let text = fs::read_to_string(path)
        .map_err(|_| StageError::Dependency(format!("missing artifact {}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| StageError::Other(anyhow::anyhow!("parsing {}: {e}", path.display())))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut writer = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut writer, item)
            .map_err(|e| StageError::Other(anyhow::anyhow!("writing {}: {e}", path.display())))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StageError> {
    let file = fs::File::open(path)
        .map_err(|_| StageError::Dependency(format!("missing artifact {}", path.display())))?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| {
            StageError::Other(anyhow::anyhow!("{} line {}: {e}", path.display(), idx + 1))
        })?);
    }
    Ok(items)
}

/// Writes CSV rows with a header; fields are pre-rendered strings (the
/// writers quote nothing, so values must not contain commas or newlines —
/// true for every table this pipeline emits except free-text notes, which
/// are quoted by the caller).
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut writer = BufWriter::new(fs::File::create(path)?);
    writeln!(writer, "{header}")?;
    for row in rows {
        writeln!(writer, "{}", row.join(","))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, StageError> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

/// Reads hit lines back grouped per sample, preserving on-disk order.
pub fn read_hits_grouped(path: &Path) -> Result<Vec<(String, Vec<EndpointHit>)>, StageError> {
    let hits: Vec<EndpointHit> = read_jsonl(path)?;
    let mut grouped: Vec<(String, Vec<EndpointHit>)> = Vec::new();
    for hit in hits {
        match grouped.last_mut() {
            Some((id, list)) if *id == hit.sample_id => list.push(hit),
            _ => grouped.push((hit.sample_id.clone(), vec![hit])),
        }
    }
    Ok(grouped)
}

/// Timestamp-free enrichment row: the analytic artifact form of a store
/// entry. Cache files keep `fetched_at`; artifacts must not, or pipeline
/// determinism dies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrichedRow {
    pub address: Ipv4Addr,
    pub country: Option<String>,
    pub city: Option<String>,
    pub asn: Option<u32>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub geo_provider: Option<String>,
    pub geo_status: Option<EntryStatus>,
    pub open_ports: Option<Vec<u16>>,
    pub cves: Option<Vec<CveCell>>,
    pub device_type: Option<String>,
    pub scan_provider: Option<String>,
    pub scan_status: Option<EntryStatus>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CveCell {
    pub id: String,
    pub severity: atlas_core::enrich::Severity,
}

impl EnrichedRow {
    pub fn from_entry(address: Ipv4Addr, entry: &StoreEntry) -> Self {
        EnrichedRow {
            address,
            country: entry.geo.as_ref().map(|g| g.country.clone()),
            city: entry.geo.as_ref().and_then(|g| g.city.clone()),
            asn: entry.geo.as_ref().and_then(|g| g.asn),
            latitude: entry.geo.as_ref().map(|g| g.latitude),
            longitude: entry.geo.as_ref().map(|g| g.longitude),
            geo_provider: entry.geo.as_ref().map(|g| g.provider_id.clone()),
            geo_status: entry.geo_status,
            open_ports: entry
                .scan
                .as_ref()
                .map(|s| s.open_ports.iter().copied().collect()),
            cves: entry.scan.as_ref().map(|s| {
                s.cves
                    .iter()
                    .map(|c| CveCell {
                        id: c.id.clone(),
                        severity: c.severity,
                    })
                    .collect()
            }),
            device_type: entry.scan.as_ref().and_then(|s| s.device_type.clone()),
            scan_provider: entry.scan.as_ref().map(|s| s.provider_id.clone()),
            scan_status: entry.scan_status,
        }
    }

    fn to_entry(&self) -> StoreEntry {
        let geo = self.country.as_ref().map(|country| GeoRecord {
            address: self.address,
            country: country.clone(),
            city: self.city.clone(),
            asn: self.asn,
            latitude: self.latitude.unwrap_or(0.0),
            longitude: self.longitude.unwrap_or(0.0),
            provider_id: self.geo_provider.clone().unwrap_or_default(),
            fetched_at: 0,
        });
        let scan = self.open_ports.as_ref().map(|ports| ScanRecord {
            address: self.address,
            open_ports: ports.iter().copied().collect(),
            cves: self
                .cves
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|c| atlas_core::enrich::CveEntry {
                    id: c.id,
                    severity: c.severity,
                })
                .collect(),
            device_type: self.device_type.clone(),
            provider_id: self.scan_provider.clone().unwrap_or_default(),
            fetched_at: 0,
        });
        StoreEntry {
            geo,
            geo_status: self.geo_status,
            scan,
            scan_status: self.scan_status,
        }
    }
}

/// Rebuilds a store from the timestamp-free artifact rows.
pub fn store_from_rows(rows: &[EnrichedRow]) -> EnrichmentStore {
    let mut store = EnrichmentStore::new();
    for row in rows {
        store.insert(row.address, row.to_entry());
    }
    store
}

/// Loads the enriched artifact as a store; a dependency error when absent.
pub fn load_enriched_store(out: &Path) -> Result<EnrichmentStore, StageError> {
    let rows: Vec<EnrichedRow> = read_jsonl(&out.join(ENRICHED))?;
    Ok(store_from_rows(&rows))
}

/// Stage summaries carry their artifact list; the report stage and the
/// determinism checks read it back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactList {
    pub artifacts: Vec<String>,
}

pub fn summary_artifacts(out: &Path, summary_name: &str) -> Option<Vec<String>> {
    let value: ArtifactList = read_json(&out.join(summary_name)).ok()?;
    Some(value.artifacts)
}

/// Machine-readable failure document written next to the artifacts.
#[derive(Debug, Serialize)]
pub struct ErrorDoc<'a> {
    pub stage: &'a str,
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
}

pub fn write_error_doc(out: &Path, stage: &str, err: &StageError) {
    let doc = ErrorDoc {
        stage,
        kind: err.kind(),
        exit_code: err.exit_code(),
        message: err.to_string(),
    };
    let _ = fs::create_dir_all(out);
    if let Ok(mut text) = serde_json::to_string_pretty(&doc) {
        text.push('\n');
        let _ = fs::write(out.join(ERROR_DOC), text);
    }
}

