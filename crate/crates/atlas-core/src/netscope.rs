//! Network-centric analysis of masked targets: prefix breakdowns, covered
//! address arithmetic, and the scan-data join feeding device clusters.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::enrich::EnrichmentStore;
use crate::exposure::{
    amplification_flags, closure_recommendations, default_amplification_rules, device_clusters,
    port_profile, AmplificationFlag, DeviceTypeCluster, InsufficientSupport, PortProfile,
    Recommendation,
};
use crate::ipspace::{length_breakdown, LengthBreakdownRow, Prefix, PrefixSet};

/// Masked-network scope: how much address space the masked endpoints cover
/// and what scan data exists inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScope {
    /// Unique prefixes per length at extraction granularity (dedup only;
    /// overlaps across lengths retained).
    pub breakdown_raw: Vec<LengthBreakdownRow>,
    /// Unique prefixes per length after containment removal.
    pub breakdown_normalized: Vec<LengthBreakdownRow>,
    /// Exact covered space of the merge-disabled disjoint set.
    pub covered_addresses: u64,
    /// Scanned addresses inside the scope.
    pub active_hosts: u64,
    pub active_addresses: BTreeSet<Ipv4Addr>,
    pub clusters: Vec<DeviceTypeCluster>,
    /// Active hosts with no device label (excluded from clusters).
    pub untyped_hosts: u64,
}

/// Expands masked prefixes into a scope and joins the enrichment store.
/// The store may cover only a sample of the space; `active_hosts` records
/// observed coverage rather than extrapolating.
pub fn build_scope(masked: &[Prefix], store: &EnrichmentStore) -> NetworkScope {
    let disjoint = PrefixSet::normalized_unmerged(masked.iter().copied());
    let normalized_rows = length_breakdown(disjoint.prefixes());

    let active_addresses: BTreeSet<Ipv4Addr> = store
        .scanned_addresses()
        .filter(|addr| disjoint.contains(*addr))
        .collect();
    let (clusters, untyped_hosts) = device_clusters(store, &active_addresses);

    NetworkScope {
        breakdown_raw: length_breakdown(masked),
        breakdown_normalized: normalized_rows,
        covered_addresses: disjoint.address_count(),
        active_hosts: active_addresses.len() as u64,
        active_addresses,
        clusters,
        untyped_hosts,
    }
}

/// Exposure report for a scope: port profile and amplification flags over
/// the active hosts, plus per-device-type closure recommendations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeExposureReport {
    pub profile: PortProfile,
    pub flags: Vec<AmplificationFlag>,
    pub recommendations: Vec<Recommendation>,
    pub insufficient_support: Vec<InsufficientSupport>,
}

/// Delegates the scope's clusters and active hosts to the exposure
/// operations under the default amplification ruleset.
pub fn scope_exposure(
    scope: &NetworkScope,
    store: &EnrichmentStore,
    threshold: f64,
    min_support: u64,
) -> ScopeExposureReport {
    scope_exposure_with_rules(
        scope,
        store,
        &default_amplification_rules(),
        threshold,
        min_support,
    )
}

/// [`scope_exposure`] with an explicit amplification ruleset.
pub fn scope_exposure_with_rules(
    scope: &NetworkScope,
    store: &EnrichmentStore,
    rules: &[crate::exposure::AmplificationRule],
    threshold: f64,
    min_support: u64,
) -> ScopeExposureReport {
    let profile = port_profile(store, &scope.active_addresses, "netscope");
    let flags = amplification_flags(&profile, rules);
    let (recommendations, insufficient_support) =
        closure_recommendations(&scope.clusters, threshold, min_support);
    ScopeExposureReport {
        profile,
        flags,
        recommendations,
        insufficient_support,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrich::ScanRecord;
    use crate::exposure::{DEFAULT_CLOSURE_THRESHOLD, DEFAULT_MIN_SUPPORT};
    use proptest::prelude::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn seed_scan(store: &mut EnrichmentStore, addr: Ipv4Addr, ports: &[u16], device: Option<&str>) {
        store.entry_mut(addr).scan = Some(ScanRecord {
            address: addr,
            open_ports: ports.iter().copied().collect(),
            cves: Vec::new(),
            device_type: device.map(str::to_string),
            provider_id: "test".to_string(),
            fetched_at: 0,
        });
    }

    #[test]
    fn two_slash24s_with_seven_scanned_hosts() {
        let masked = vec![p("61.10.1.0/24"), p("61.10.5.0/24")];
        let mut store = EnrichmentStore::new();
        for i in 0..7u32 {
            let addr = Ipv4Addr::from(u32::from(Ipv4Addr::new(61, 10, 1, 0)) + i);
            seed_scan(&mut store, addr, &[80], Some("camera"));
        }
        // One scanned host outside the scope must not count.
        seed_scan(&mut store, Ipv4Addr::new(9, 9, 9, 9), &[80], None);
        let scope = build_scope(&masked, &store);
        assert_eq!(scope.covered_addresses, 512);
        assert_eq!(scope.active_hosts, 7);
        assert_eq!(scope.clusters.len(), 1);
        assert_eq!(scope.clusters[0].member_count(), 7);
    }

    #[test]
    fn paper_breakdown_27_435_125() {
        let mut masked = Vec::new();
        for i in 0..125u32 {
            masked.push(Prefix::new((60 + i) << 24, 8).unwrap());
        }
        for i in 0..435u32 {
            let base = if i < 256 {
                (185 << 24) | (i << 16)
            } else {
                (186 << 24) | ((i - 256) << 16)
            };
            masked.push(Prefix::new(base, 16).unwrap());
        }
        for i in 0..27u32 {
            masked.push(Prefix::new((187 << 24) | (i << 8), 24).unwrap());
        }
        let scope = build_scope(&masked, &EnrichmentStore::new());
        let row = |len: u8| {
            scope
                .breakdown_raw
                .iter()
                .find(|r| r.length == len)
                .unwrap()
                .unique_prefixes
        };
        assert_eq!(row(24), 27);
        assert_eq!(row(16), 435);
        assert_eq!(row(8), 125);
        assert_eq!(scope.covered_addresses, 2_125_667_072);
        // Disjoint input: both views agree.
        assert_eq!(scope.breakdown_raw, scope.breakdown_normalized);
    }

    #[test]
    fn empty_masked_set_is_all_zero() {
        let scope = build_scope(&[], &EnrichmentStore::new());
        assert_eq!(scope.covered_addresses, 0);
        assert_eq!(scope.active_hosts, 0);
        assert!(scope.clusters.is_empty());
        for row in &scope.breakdown_raw {
            assert_eq!(row.unique_prefixes, 0);
        }
    }

    #[test]
    fn raw_breakdown_keeps_contained_prefixes() {
        let masked = vec![p("61.0.0.0/8"), p("61.5.0.0/16"), p("61.5.0.0/16")];
        let scope = build_scope(&masked, &EnrichmentStore::new());
        let raw16 = scope
            .breakdown_raw
            .iter()
            .find(|r| r.length == 16)
            .unwrap()
            .unique_prefixes;
        let norm16 = scope
            .breakdown_normalized
            .iter()
            .find(|r| r.length == 16)
            .unwrap()
            .unique_prefixes;
        assert_eq!(raw16, 1);
        assert_eq!(norm16, 0);
        assert_eq!(scope.covered_addresses, 1 << 24);
    }

    #[test]
    fn scope_exposure_composes_the_exposure_operations() {
        let masked = vec![p("61.10.1.0/24")];
        let mut store = EnrichmentStore::new();
        for i in 0..100u32 {
            let addr = Ipv4Addr::from(u32::from(Ipv4Addr::new(61, 10, 1, 0)) + i);
            let mut ports = vec![];
            if i < 5 {
                ports.push(123);
            }
            if i < 90 {
                ports.push(80);
            }
            seed_scan(&mut store, addr, &ports, Some("hvac"));
        }
        let scope = build_scope(&masked, &store);
        let report = scope_exposure(&scope, &store, DEFAULT_CLOSURE_THRESHOLD, DEFAULT_MIN_SUPPORT);

        // Composition oracle: assemble the same report by hand.
        let profile = port_profile(&store, &scope.active_addresses, "netscope");
        let flags = amplification_flags(&profile, &default_amplification_rules());
        let (recs, insufficient) = closure_recommendations(
            &scope.clusters,
            DEFAULT_CLOSURE_THRESHOLD,
            DEFAULT_MIN_SUPPORT,
        );
        assert_eq!(report.profile, profile);
        assert_eq!(report.flags, flags);
        assert_eq!(report.recommendations, recs);
        assert_eq!(report.insufficient_support, insufficient);
        assert!(!report.recommendations.is_empty());
    }

    #[test]
    fn scope_without_device_types_reports_diagnostics_only() {
        let masked = vec![p("61.10.1.0/24")];
        let mut store = EnrichmentStore::new();
        for i in 0..30u32 {
            let addr = Ipv4Addr::from(u32::from(Ipv4Addr::new(61, 10, 1, 0)) + i);
            seed_scan(&mut store, addr, &[80], None);
        }
        let scope = build_scope(&masked, &store);
        assert_eq!(scope.untyped_hosts, 30);
        assert!(scope.clusters.is_empty());
        let report = scope_exposure(&scope, &store, DEFAULT_CLOSURE_THRESHOLD, DEFAULT_MIN_SUPPORT);
        assert!(report.recommendations.is_empty());
        assert_eq!(report.profile.covered, 30);
    }

    proptest! {
        #[test]
        fn active_hosts_match_brute_force_membership(
            hosts in prop::collection::btree_set(0u32..1024, 0..60),
            prefixes in prop::collection::vec((0u32..4, 24u8..=28), 1..6),
        ) {
            // Everything confined to 61.10.{0..4}.x so the brute-force side
            // stays tiny.
            let base = u32::from(Ipv4Addr::new(61, 10, 0, 0));
            let masked: Vec<Prefix> = prefixes
                .iter()
                .map(|(third, len)| {
                    Prefix::new_normalized(base | (third << 8), *len).unwrap().0
                })
                .collect();
            let mut store = EnrichmentStore::new();
            for h in &hosts {
                seed_scan(&mut store, Ipv4Addr::from(base | h), &[80], None);
            }
            let scope = build_scope(&masked, &store);
            let expected = hosts
                .iter()
                .filter(|&&h| masked.iter().any(|p| p.contains_u32(base | h)))
                .count() as u64;
            prop_assert_eq!(scope.active_hosts, expected);
        }

        #[test]
        fn breakdown_invariant_under_duplication(
            prefixes in prop::collection::vec((0u32..16, 20u8..=28), 1..10),
        ) {
            let base = u32::from(Ipv4Addr::new(61, 0, 0, 0));
            let masked: Vec<Prefix> = prefixes
                .iter()
                .map(|(n, len)| Prefix::new_normalized(base | (n << 12), *len).unwrap().0)
                .collect();
            let doubled: Vec<Prefix> = masked.iter().chain(masked.iter()).copied().collect();
            let a = build_scope(&masked, &EnrichmentStore::new());
            let b = build_scope(&doubled, &EnrichmentStore::new());
            prop_assert_eq!(a.breakdown_raw, b.breakdown_raw);
            prop_assert_eq!(a.covered_addresses, b.covered_addresses);
        }
    }
}
