//! Exposure analytics over scan intelligence: port profiles, amplification
//! flags, CVE summaries, device-type clusters, and the port-closure rule.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::enrich::{EnrichmentStore, Severity};

/// Aggregate of open ports across a population of addresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortProfile {
    pub role: String,
    pub population: u64,
    /// Addresses in the population that have scan data.
    pub covered: u64,
    /// Σ |open_ports| over covered addresses.
    pub total_open_ports: u64,
    /// (port, addresses with it open), count descending, port ascending on
    /// ties.
    pub per_port: Vec<(u16, u64)>,
}

/// Counts as defined above; `per_port` values always sum to
/// `total_open_ports`.
pub fn port_profile(
    store: &EnrichmentStore,
    population: &BTreeSet<Ipv4Addr>,
    role: &str,
) -> PortProfile {
    let mut covered = 0u64;
    let mut total = 0u64;
    let mut per_port: BTreeMap<u16, u64> = BTreeMap::new();
    for &addr in population {
        if let Some(scan) = store.scan(addr) {
            covered += 1;
            total += scan.open_ports.len() as u64;
            for &port in &scan.open_ports {
                *per_port.entry(port).or_insert(0) += 1;
            }
        }
    }
    let mut per_port: Vec<(u16, u64)> = per_port.into_iter().collect();
    per_port.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    PortProfile {
        role: role.to_string(),
        population: population.len() as u64,
        covered,
        total_open_ports: total,
        per_port,
    }
}

/// One row of the UDP amplification ruleset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplificationRule {
    pub port: u16,
    pub protocol: String,
    pub note: String,
}

/// UDP services with well-known reflection/amplification abuse potential.
pub fn default_amplification_rules() -> Vec<AmplificationRule> {
    let rule = |port: u16, protocol: &str, note: &str| AmplificationRule {
        port,
        protocol: protocol.to_string(),
        note: note.to_string(),
    };
    vec![
        rule(
            53,
            "DNS",
            "open resolvers reflect and amplify spoofed queries",
        ),
        rule(
            123,
            "NTP",
            "UDP-based, prone to IP spoofing; responses can amplify attack traffic ~1,000x",
        ),
        rule(161, "SNMP", "bulk requests return large amplified replies"),
        rule(1900, "SSDP", "discovery responses amplify spoofed requests"),
        rule(
            11211,
            "memcached",
            "UDP stats responses amplify by tens of thousands",
        ),
    ]
}

/// Parses an editable ruleset table: one `port, protocol, note` line per
/// rule, `#` comments and blank lines skipped.
pub fn parse_amplification_rules(text: &str) -> Result<Vec<AmplificationRule>, String> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, ',').map(str::trim);
        let port = fields
            .next()
            .and_then(|p| p.parse::<u16>().ok())
            .ok_or_else(|| format!("line {}: bad port in {raw:?}", idx + 1))?;
        let protocol = fields
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| format!("line {}: missing protocol in {raw:?}", idx + 1))?;
        let note = fields.next().unwrap_or("").to_string();
        rules.push(AmplificationRule {
            port,
            protocol: protocol.to_string(),
            note,
        });
    }
    Ok(rules)
}

/// A ruleset port observed in a profile, with the affected host count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplificationFlag {
    pub port: u16,
    pub protocol: String,
    pub hosts: u64,
    pub note: String,
}

/// One flag per ruleset port present in the profile, in profile order.
pub fn amplification_flags(
    profile: &PortProfile,
    rules: &[AmplificationRule],
) -> Vec<AmplificationFlag> {
    let by_port: BTreeMap<u16, &AmplificationRule> = rules.iter().map(|r| (r.port, r)).collect();
    profile
        .per_port
        .iter()
        .filter_map(|&(port, hosts)| {
            by_port.get(&port).map(|rule| AmplificationFlag {
                port,
                protocol: rule.protocol.clone(),
                hosts,
                note: rule.note.clone(),
            })
        })
        .collect()
}

/// One CVE with the number of affected addresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveRow {
    pub id: String,
    pub severity: Severity,
    pub hosts: u64,
}

/// Per-CVE affected-address counts over a population, ranked by count
/// descending with lexicographic id tie-breaks.
pub fn cve_summary(store: &EnrichmentStore, population: &BTreeSet<Ipv4Addr>) -> Vec<CveRow> {
    let mut counts: BTreeMap<String, (Severity, u64)> = BTreeMap::new();
    for &addr in population {
        if let Some(scan) = store.scan(addr) {
            for cve in &scan.cves {
                let entry = counts.entry(cve.id.clone()).or_insert((cve.severity, 0));
                entry.1 += 1;
            }
        }
    }
    let mut rows: Vec<CveRow> = counts
        .into_iter()
        .map(|(id, (severity, hosts))| CveRow {
            id,
            severity,
            hosts,
        })
        .collect();
    rows.sort_by(|a, b| b.hosts.cmp(&a.hosts).then(a.id.cmp(&b.id)));
    rows
}

/// Hosts sharing a provider-reported device label, with per-port usage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTypeCluster {
    pub device_type: String,
    pub members: Vec<Ipv4Addr>,
    /// (port, members with it open, usage fraction), port ascending.
    pub port_usage: Vec<(u16, u64, f64)>,
}

impl DeviceTypeCluster {
    pub fn member_count(&self) -> u64 {
        self.members.len() as u64
    }
}

/// Groups scanned addresses by device type. Labels are provider-verbatim
/// apart from the trim+lowercase applied at validation; the second slot
/// counts scanned hosts without a label.
pub fn device_clusters(
    store: &EnrichmentStore,
    population: &BTreeSet<Ipv4Addr>,
) -> (Vec<DeviceTypeCluster>, u64) {
    let mut groups: BTreeMap<String, Vec<Ipv4Addr>> = BTreeMap::new();
    let mut untyped = 0u64;
    for &addr in population {
        if let Some(scan) = store.scan(addr) {
            match &scan.device_type {
                Some(label) => groups.entry(label.clone()).or_default().push(addr),
                None => untyped += 1,
            }
        }
    }
    let clusters = groups
        .into_iter()
        .map(|(device_type, members)| {
            let mut ports: BTreeMap<u16, u64> = BTreeMap::new();
            for addr in &members {
                if let Some(scan) = store.scan(*addr) {
                    for &port in &scan.open_ports {
                        *ports.entry(port).or_insert(0) += 1;
                    }
                }
            }
            let member_count = members.len() as u64;
            let port_usage = ports
                .into_iter()
                .map(|(port, open)| (port, open, open as f64 / member_count as f64))
                .collect();
            DeviceTypeCluster {
                device_type,
                members,
                port_usage,
            }
        })
        .collect();
    (clusters, untyped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationAction {
    Close,
    Keep,
}

/// Close/keep verdict for one (device type, port).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub device_type: String,
    pub port: u16,
    pub usage_fraction: f64,
    pub action: RecommendationAction,
    /// Cluster member count backing the verdict.
    pub support: u64,
}

/// A cluster too small to ground recommendations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsufficientSupport {
    pub device_type: String,
    pub support: u64,
}

/// Default closure threshold: ports used by under 10% of a device type.
pub const DEFAULT_CLOSURE_THRESHOLD: f64 = 0.10;
/// Default minimum cluster size before recommendations are emitted.
pub const DEFAULT_MIN_SUPPORT: u64 = 20;

/// Applies the closure rule: a port open on strictly less than `threshold`
/// of a device type should be closed. Clusters below `min_support` produce
/// diagnostics instead of recommendations.
///
/// The comparison runs on integer basis points, so an exactly-at-threshold
/// usage (10 of 100 hosts at 10%) is a keep regardless of float rounding.
pub fn closure_recommendations(
    clusters: &[DeviceTypeCluster],
    threshold: f64,
    min_support: u64,
) -> (Vec<Recommendation>, Vec<InsufficientSupport>) {
    let threshold_bp = (threshold * 10_000.0).round() as u64;
    let mut recommendations = Vec::new();
    let mut insufficient = Vec::new();
    for cluster in clusters {
        let support = cluster.member_count();
        if support < min_support {
            insufficient.push(InsufficientSupport {
                device_type: cluster.device_type.clone(),
                support,
            });
            continue;
        }
        for &(port, open, fraction) in &cluster.port_usage {
            let close = open * 10_000 < threshold_bp * support;
            recommendations.push(Recommendation {
                device_type: cluster.device_type.clone(),
                port,
                usage_fraction: fraction,
                action: if close {
                    RecommendationAction::Close
                } else {
                    RecommendationAction::Keep
                },
                support,
            });
        }
    }
    (recommendations, insufficient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrich::ScanRecord;
    use proptest::prelude::*;

    fn seed_scan(store: &mut EnrichmentStore, addr: Ipv4Addr, ports: &[u16], device: Option<&str>) {
        seed_scan_with_cves(store, addr, ports, device, &[]);
    }

    fn seed_scan_with_cves(
        store: &mut EnrichmentStore,
        addr: Ipv4Addr,
        ports: &[u16],
        device: Option<&str>,
        cves: &[(&str, Severity)],
    ) {
        store.entry_mut(addr).scan = Some(ScanRecord {
            address: addr,
            open_ports: ports.iter().copied().collect(),
            cves: cves
                .iter()
                .map(|(id, severity)| crate::enrich::CveEntry {
                    id: id.to_string(),
                    severity: *severity,
                })
                .collect(),
            device_type: device.map(str::to_string),
            provider_id: "test".to_string(),
            fetched_at: 0,
        });
    }

    fn addr(i: u32) -> Ipv4Addr {
        Ipv4Addr::from(0x3C00_0000 + i)
    }

    #[test]
    fn paper_profile_877_716_5745() {
        // 716 covered of 877; port entries engineered to total 5,745.
        let mut store = EnrichmentStore::new();
        let mut population = BTreeSet::new();
        for i in 0..877u32 {
            population.insert(addr(i));
            if i < 716 {
                let mut ports: Vec<u16> = (0..8).map(|p| 1000 + p).collect();
                if i < 17 {
                    ports.push(2000);
                }
                seed_scan(&mut store, addr(i), &ports, None);
            }
        }
        let profile = port_profile(&store, &population, "dropzone");
        assert_eq!(profile.population, 877);
        assert_eq!(profile.covered, 716);
        assert_eq!(profile.total_open_ports, 5745);
        let sum: u64 = profile.per_port.iter().map(|(_, c)| c).sum();
        assert_eq!(sum, profile.total_open_ports);
    }

    #[test]
    fn zero_coverage_profile_is_empty() {
        let store = EnrichmentStore::new();
        let population: BTreeSet<Ipv4Addr> = [addr(1), addr(2)].into();
        let profile = port_profile(&store, &population, "target");
        assert_eq!(profile.covered, 0);
        assert!(profile.per_port.is_empty());
        assert_eq!(profile.total_open_ports, 0);
    }

    #[test]
    fn hand_enumerated_profile() {
        let mut store = EnrichmentStore::new();
        seed_scan(&mut store, addr(1), &[22], None);
        seed_scan(&mut store, addr(2), &[22, 80], None);
        seed_scan(&mut store, addr(3), &[80], None);
        let population: BTreeSet<Ipv4Addr> = [addr(1), addr(2), addr(3)].into();
        let profile = port_profile(&store, &population, "x");
        assert_eq!(profile.total_open_ports, 4);
        assert_eq!(profile.per_port, vec![(22, 2), (80, 2)]);
    }

    #[test]
    fn ntp_port_is_flagged_with_host_count() {
        let mut store = EnrichmentStore::new();
        let mut population = BTreeSet::new();
        for i in 0..40 {
            population.insert(addr(i));
            seed_scan(&mut store, addr(i), &[123, 80], None);
        }
        let profile = port_profile(&store, &population, "dropzone");
        let flags = amplification_flags(&profile, &default_amplification_rules());
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].protocol, "NTP");
        assert_eq!(flags[0].hosts, 40);
        assert!(flags[0].note.contains("spoofing"));
    }

    #[test]
    fn profile_without_ruleset_ports_yields_no_flags() {
        let mut store = EnrichmentStore::new();
        seed_scan(&mut store, addr(1), &[22, 443], None);
        let population: BTreeSet<Ipv4Addr> = [addr(1)].into();
        let profile = port_profile(&store, &population, "x");
        assert!(amplification_flags(&profile, &default_amplification_rules()).is_empty());
    }

    #[test]
    fn ruleset_table_parses_and_rejects_bad_lines() {
        let rules = parse_amplification_rules(
            "# custom rules\n161, SNMP, bulk requests amplify\n19, CHARGEN,\n",
        )
        .unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].port, 161);
        assert_eq!(rules[0].protocol, "SNMP");
        assert_eq!(rules[1].note, "");
        assert!(parse_amplification_rules("notaport, X, y").is_err());
        assert!(parse_amplification_rules("80").is_err());
    }

    #[test]
    fn custom_ruleset_flags_snmp_once() {
        let mut store = EnrichmentStore::new();
        seed_scan(&mut store, addr(1), &[161], None);
        let population: BTreeSet<Ipv4Addr> = [addr(1)].into();
        let profile = port_profile(&store, &population, "x");
        let rules = vec![AmplificationRule {
            port: 161,
            protocol: "SNMP".to_string(),
            note: "amplifies".to_string(),
        }];
        let flags = amplification_flags(&profile, &rules);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].port, 161);
    }

    #[test]
    fn cve_ranking_second_most_common() {
        let mut store = EnrichmentStore::new();
        let mut population = BTreeSet::new();
        for i in 0..30u32 {
            population.insert(addr(i));
            let mut cves: Vec<(&str, Severity)> = vec![("CVE-2016-0777", Severity::Medium)];
            if i < 20 {
                cves.push(("CVE-2014-1692", Severity::High));
            }
            if i < 5 {
                cves.push(("CVE-2019-0001", Severity::Low));
            }
            seed_scan_with_cves(&mut store, addr(i), &[22], None, &cves);
        }
        let rows = cve_summary(&store, &population);
        assert_eq!(rows[0].id, "CVE-2016-0777");
        assert_eq!(rows[1].id, "CVE-2014-1692");
        assert_eq!(rows[1].severity, Severity::High);
        assert_eq!(rows[1].hosts, 20);
    }

    #[test]
    fn cve_empty_and_tie_cases() {
        let store = EnrichmentStore::new();
        assert!(cve_summary(&store, &BTreeSet::new()).is_empty());

        let mut store = EnrichmentStore::new();
        let population: BTreeSet<Ipv4Addr> = [addr(1)].into();
        seed_scan_with_cves(
            &mut store,
            addr(1),
            &[22],
            None,
            &[
                ("CVE-2020-0002", Severity::Low),
                ("CVE-2020-0001", Severity::Low),
            ],
        );
        let rows = cve_summary(&store, &population);
        assert_eq!(rows[0].id, "CVE-2020-0001");
        assert_eq!(rows[1].id, "CVE-2020-0002");
    }

    fn hvac_fixture() -> Vec<DeviceTypeCluster> {
        // 100 HVAC hosts: port 123 open on 5 (5%), port 80 on 90 (90%),
        // port 7 on exactly 10 (the 10% boundary).
        let mut store = EnrichmentStore::new();
        let mut population = BTreeSet::new();
        for i in 0..100u32 {
            population.insert(addr(i));
            let mut ports = Vec::new();
            if i < 5 {
                ports.push(123);
            }
            if i < 90 {
                ports.push(80);
            }
            if i < 10 {
                ports.push(7);
            }
            seed_scan(&mut store, addr(i), &ports, Some("hvac"));
        }
        let (clusters, untyped) = device_clusters(&store, &population);
        assert_eq!(untyped, 0);
        clusters
    }

    #[test]
    fn closure_rule_close_keep_and_boundary() {
        let clusters = hvac_fixture();
        let (recs, insufficient) =
            closure_recommendations(&clusters, DEFAULT_CLOSURE_THRESHOLD, DEFAULT_MIN_SUPPORT);
        assert!(insufficient.is_empty());
        let by_port: BTreeMap<u16, &Recommendation> = recs.iter().map(|r| (r.port, r)).collect();
        assert_eq!(by_port[&123].action, RecommendationAction::Close);
        assert_eq!(by_port[&80].action, RecommendationAction::Keep);
        // Exactly 10%: strict less-than means keep.
        assert_eq!(by_port[&7].action, RecommendationAction::Keep);
    }

    #[test]
    fn small_clusters_yield_diagnostics_only() {
        let mut store = EnrichmentStore::new();
        let mut population = BTreeSet::new();
        for i in 0..10u32 {
            population.insert(addr(i));
            seed_scan(&mut store, addr(i), &[80], Some("pdu"));
        }
        let (clusters, _) = device_clusters(&store, &population);
        let (recs, insufficient) =
            closure_recommendations(&clusters, DEFAULT_CLOSURE_THRESHOLD, DEFAULT_MIN_SUPPORT);
        assert!(recs.is_empty());
        assert_eq!(
            insufficient,
            vec![InsufficientSupport {
                device_type: "pdu".to_string(),
                support: 10,
            }]
        );
    }

    proptest! {
        #[test]
        fn every_close_recommendation_satisfies_its_invariant(
            members in 20u64..200,
            opens in prop::collection::vec(0u64..200, 1..10),
        ) {
            let cluster = DeviceTypeCluster {
                device_type: "x".to_string(),
                members: (0..members as u32).map(addr).collect(),
                port_usage: opens
                    .iter()
                    .enumerate()
                    .map(|(i, &o)| {
                        let open = o.min(members);
                        (i as u16 + 1, open, open as f64 / members as f64)
                    })
                    .collect(),
            };
            let (recs, _) = closure_recommendations(
                &[cluster],
                DEFAULT_CLOSURE_THRESHOLD,
                DEFAULT_MIN_SUPPORT,
            );
            for rec in recs {
                prop_assert!(rec.support >= DEFAULT_MIN_SUPPORT);
                match rec.action {
                    RecommendationAction::Close => {
                        prop_assert!(rec.usage_fraction < DEFAULT_CLOSURE_THRESHOLD)
                    }
                    RecommendationAction::Keep => {
                        prop_assert!(rec.usage_fraction >= DEFAULT_CLOSURE_THRESHOLD - 1e-12)
                    }
                }
            }
        }
    }
}
