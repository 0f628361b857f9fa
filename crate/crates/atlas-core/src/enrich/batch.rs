//! Cache-first batch enrichment.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::providers::{lookup_geo, lookup_scan, GeoProvider, LookupError, ScanProvider};
use super::rate::RateLimiter;
use super::store::EnrichmentStore;
use super::{EntryStatus, GeoRecord, ScanRecord, DEFAULT_RATE_PER_SEC, DEFAULT_TTL_SECS};
use crate::exec;

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub ttl_secs: u64,
    pub rate_per_sec: f64,
    /// Timestamp stamped onto fetched records. Supplying it explicitly
    /// keeps fixture-driven runs deterministic.
    pub now_unix: u64,
}

impl BatchOptions {
    pub fn at(now_unix: u64) -> Self {
        BatchOptions {
            ttl_secs: DEFAULT_TTL_SECS,
            rate_per_sec: DEFAULT_RATE_PER_SEC,
            now_unix,
        }
    }
}

impl Default for BatchOptions {
    fn default() -> Self {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        BatchOptions::at(now)
    }
}

/// Per-side tallies for one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCounts {
    pub cached: u64,
    pub fetched: u64,
    pub not_found: u64,
    pub errors: u64,
}

/// What a batch did; individual failures never abort the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub geo: SideCounts,
    pub scan: SideCounts,
    pub errors: Vec<(Ipv4Addr, String)>,
}

enum Outcome<R> {
    Record(R),
    NotFound,
    Failed(String),
}

impl<R> Outcome<R> {
    fn from_lookup(result: Result<R, LookupError>) -> Self {
        match result {
            Ok(rec) => Outcome::Record(rec),
            Err(LookupError::NotFound) => Outcome::NotFound,
            Err(LookupError::Transport(m)) => Outcome::Failed(format!("transport: {m}")),
            Err(LookupError::InvalidData(m)) => Outcome::Failed(m),
        }
    }
}

fn fetch_side<R, F>(to_fetch: &[Ipv4Addr], metered: bool, rate: f64, fetch: F) -> Vec<Outcome<R>>
where
    R: Send,
    F: Fn(Ipv4Addr) -> Outcome<R> + Sync + Send,
{
    if metered {
        // Quota-bound: stay sequential under the limiter.
        let mut limiter = RateLimiter::new(rate);
        to_fetch
            .iter()
            .map(|addr| {
                limiter.acquire_blocking();
                fetch(*addr)
            })
            .collect()
    } else {
        // Fixtures are pure lookups: fan out, commit later in order.
        exec::map_vec(to_fetch, |addr| fetch(*addr))
    }
}

/// Enriches `addresses` through the configured providers.
///
/// Cache-first: entries fresher than the TTL are never re-fetched. The
/// store only ever grows; statuses record the latest interaction per side.
pub fn enrich_batch(
    addresses: &BTreeSet<Ipv4Addr>,
    geo: Option<&dyn GeoProvider>,
    scan: Option<&dyn ScanProvider>,
    store: &mut EnrichmentStore,
    opts: &BatchOptions,
) -> BatchReport {
    let mut report = BatchReport::default();
    let fresh = |fetched_at: u64| opts.now_unix.saturating_sub(fetched_at) < opts.ttl_secs;

    if let Some(provider) = geo {
        let mut to_fetch: Vec<Ipv4Addr> = Vec::new();
        for &addr in addresses {
            let cached = store
                .entry(addr)
                .and_then(|e| e.geo.as_ref())
                .is_some_and(|g| fresh(g.fetched_at));
            if cached {
                store.entry_mut(addr).geo_status = Some(EntryStatus::Fresh);
                report.geo.cached += 1;
            } else {
                to_fetch.push(addr);
            }
        }
        let outcomes: Vec<Outcome<GeoRecord>> =
            fetch_side(&to_fetch, provider.metered(), opts.rate_per_sec, |addr| {
                Outcome::from_lookup(lookup_geo(addr, provider, opts.now_unix))
            });
        for (addr, outcome) in to_fetch.into_iter().zip(outcomes) {
            let entry = store.entry_mut(addr);
            match outcome {
                Outcome::Record(rec) => {
                    entry.geo = Some(rec);
                    entry.geo_status = Some(EntryStatus::Fresh);
                    report.geo.fetched += 1;
                }
                Outcome::NotFound => {
                    entry.geo_status = Some(EntryStatus::NotFound);
                    report.geo.not_found += 1;
                }
                Outcome::Failed(message) => {
                    entry.geo_status = Some(EntryStatus::Error);
                    report.geo.errors += 1;
                    report.errors.push((addr, format!("geo: {message}")));
                }
            }
        }
    }

    if let Some(provider) = scan {
        let mut to_fetch: Vec<Ipv4Addr> = Vec::new();
        for &addr in addresses {
            let cached = store
                .entry(addr)
                .and_then(|e| e.scan.as_ref())
                .is_some_and(|s| fresh(s.fetched_at));
            if cached {
                store.entry_mut(addr).scan_status = Some(EntryStatus::Fresh);
                report.scan.cached += 1;
            } else {
                to_fetch.push(addr);
            }
        }
        let outcomes: Vec<Outcome<ScanRecord>> =
            fetch_side(&to_fetch, provider.metered(), opts.rate_per_sec, |addr| {
                Outcome::from_lookup(lookup_scan(addr, provider, opts.now_unix))
            });
        for (addr, outcome) in to_fetch.into_iter().zip(outcomes) {
            let entry = store.entry_mut(addr);
            match outcome {
                Outcome::Record(rec) => {
                    entry.scan = Some(rec);
                    entry.scan_status = Some(EntryStatus::Fresh);
                    report.scan.fetched += 1;
                }
                Outcome::NotFound => {
                    entry.scan_status = Some(EntryStatus::NotFound);
                    report.scan.not_found += 1;
                }
                Outcome::Failed(message) => {
                    entry.scan_status = Some(EntryStatus::Error);
                    report.scan.errors += 1;
                    report.errors.push((addr, format!("scan: {message}")));
                }
            }
        }
    }

    report.errors.sort();
    report
}
