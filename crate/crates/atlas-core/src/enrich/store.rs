//! Persistent enrichment cache: one JSONL line per address.
//!
//! Appends are legal — on load, later lines for the same address win — and
//! saving always writes the compacted, address-sorted form.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GeoRecord, ScanRecord, StoreEntry};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct StoreLine {
    address: Ipv4Addr,
    #[serde(flatten)]
    entry: StoreEntry,
}

/// Keyed cache address -> (geo?, scan?, statuses). One writer, many
/// readers; batch commits are serialized by `&mut` access.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnrichmentStore {
    entries: BTreeMap<u32, StoreEntry>,
}

impl EnrichmentStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, address: Ipv4Addr) -> Option<&StoreEntry> {
        self.entries.get(&u32::from(address))
    }

    pub fn geo(&self, address: Ipv4Addr) -> Option<&GeoRecord> {
        self.entry(address).and_then(|e| e.geo.as_ref())
    }

    pub fn scan(&self, address: Ipv4Addr) -> Option<&ScanRecord> {
        self.entry(address).and_then(|e| e.scan.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Ipv4Addr, &StoreEntry)> {
        self.entries.iter().map(|(k, v)| (Ipv4Addr::from(*k), v))
    }

    /// Addresses that carry scan data, ascending.
    pub fn scanned_addresses(&self) -> impl Iterator<Item = Ipv4Addr> + '_ {
        self.entries
            .iter()
            .filter(|(_, e)| e.scan.is_some())
            .map(|(k, _)| Ipv4Addr::from(*k))
    }

    pub(crate) fn entry_mut(&mut self, address: Ipv4Addr) -> &mut StoreEntry {
        self.entries.entry(u32::from(address)).or_default()
    }

    /// Inserts or replaces the entry for `address`; used when rebuilding a
    /// store from persisted rows.
    pub fn insert(&mut self, address: Ipv4Addr, entry: StoreEntry) {
        self.entries.insert(u32::from(address), entry);
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, StoreError> {
        let mut store = EnrichmentStore::new();
        let reader = BufReader::new(fs::File::open(path)?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: StoreLine = serde_json::from_str(&line)
                .map_err(|source| StoreError::Malformed {
                    line: idx + 1,
                    source,
                })?;
            store
                .entries
                .insert(u32::from(parsed.address), parsed.entry);
        }
        Ok(store)
    }

    /// Writes the compacted form: one line per address, ascending.
    pub fn save_jsonl(&self, path: &Path) -> Result<(), StoreError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut writer = BufWriter::new(fs::File::create(path)?);
        for (addr, entry) in &self.entries {
            let line = StoreLine {
                address: Ipv4Addr::from(*addr),
                entry: entry.clone(),
            };
            serde_json::to_writer(&mut writer, &line).map_err(std::io::Error::other)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::EntryStatus;
    use super::*;

    fn geo(addr: &str, country: &str, fetched_at: u64) -> GeoRecord {
        GeoRecord {
            address: addr.parse().unwrap(),
            country: country.to_string(),
            city: None,
            asn: None,
            latitude: 1.0,
            longitude: 2.0,
            provider_id: "fixture".to_string(),
            fetched_at,
        }
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut store = EnrichmentStore::new();
        let e = store.entry_mut("1.2.3.4".parse().unwrap());
        e.geo = Some(geo("1.2.3.4", "US", 100));
        e.geo_status = Some(EntryStatus::Fresh);
        store.save_jsonl(&path).unwrap();
        let loaded = EnrichmentStore::load_jsonl(&path).unwrap();
        assert_eq!(store, loaded);
    }

    #[test]
    fn later_appended_lines_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut first = EnrichmentStore::new();
        first.entry_mut("1.2.3.4".parse().unwrap()).geo = Some(geo("1.2.3.4", "US", 1));
        first.save_jsonl(&path).unwrap();

        let mut appended = String::new();
        let newer = StoreLine {
            address: "1.2.3.4".parse().unwrap(),
            entry: StoreEntry {
                geo: Some(geo("1.2.3.4", "NL", 2)),
                ..Default::default()
            },
        };
        appended.push_str(&serde_json::to_string(&newer).unwrap());
        appended.push('\n');
        fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(appended.as_bytes())
            .unwrap();

        let loaded = EnrichmentStore::load_jsonl(&path).unwrap();
        let rec = loaded.geo("1.2.3.4".parse().unwrap()).unwrap();
        assert_eq!(rec.country, "NL");
        assert_eq!(rec.fetched_at, 2);
    }

    #[test]
    fn malformed_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        fs::write(&path, "{\"address\": \"not-an-ip\"}\n").unwrap();
        assert!(matches!(
            EnrichmentStore::load_jsonl(&path),
            Err(StoreError::Malformed { line: 1, .. })
        ));
    }
}
