//! The seven pipeline stages. Each reads its declared inputs from the out
//! directory, writes line-delimited records plus a summary document listing
//! its artifacts, and is byte-identical on re-runs with unchanged inputs
//! and config (fixture providers assumed for enrich).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use atlas_core::affinity::{
    dropzone_stats, pairwise_overlap, target_histogram, AttackGraph, OverlapMetric,
    OverlapSummary,
};
use atlas_core::enrich::{
    enrich_batch, BatchOptions, CsvGeoFixture, EnrichmentStore, GeoProvider, JsonlScanFixture,
    ScanProvider, SideCounts,
};
use atlas_core::exposure::{
    amplification_flags, closure_recommendations, cve_summary, device_clusters, port_profile,
    InsufficientSupport, PortProfile, Recommendation, RecommendationAction,
};
use atlas_core::extract::{
    extract_corpus, EndpointHit, ExtractionReport, Role, RoleCounts, RoleManifest, SampleError,
    SampleInput,
};
use atlas_core::geo::{
    country_table, flow_map, haversine_km, ClusterPolicy, CountryTable, FlowDiagnostics,
    GeoPoint,
};
use atlas_core::ipspace::{LengthBreakdownRow, Prefix};
use atlas_core::netscope::{build_scope, scope_exposure_with_rules};

use crate::artifacts::{self as art, EnrichedRow, StageLock};
use crate::config::PipelineConfig;
use crate::error::StageError;

/// Per-invocation overrides on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub input: Option<std::path::PathBuf>,
    pub threshold: Option<f64>,
    pub metric: Option<OverlapMetric>,
    pub min_degree: Option<u64>,
    pub offline: bool,
    pub pair_table: bool,
}

impl Overrides {
    fn apply(&self, mut cfg: PipelineConfig) -> PipelineConfig {
        if let Some(input) = &self.input {
            cfg.input_dir = Some(input.clone());
        }
        if let Some(threshold) = self.threshold {
            cfg.closure_threshold = threshold;
        }
        if let Some(metric) = self.metric {
            cfg.overlap_metric = metric;
        }
        if let Some(min_degree) = self.min_degree {
            cfg.min_degree = min_degree;
        }
        if self.offline {
            cfg.offline = true;
        }
        if self.pair_table {
            cfg.emit_pair_table = true;
        }
        cfg
    }
}

pub fn run_stage(
    stage: &str,
    config_path: Option<&Path>,
    out: &Path,
    overrides: &Overrides,
) -> Result<(), StageError> {
    let result = dispatch(stage, config_path, out, overrides);
    match &result {
        Ok(()) => {
            let _ = fs::remove_file(out.join(art::ERROR_DOC));
        }
        Err(err) => art::write_error_doc(out, stage, err),
    }
    result
}

fn dispatch(
    stage: &str,
    config_path: Option<&Path>,
    out: &Path,
    overrides: &Overrides,
) -> Result<(), StageError> {
    let cfg = match config_path {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let cfg = overrides.apply(cfg);
    cfg.validate()?;

    let _lock = StageLock::acquire(out, stage)?;
    match stage {
        "extract" => run_extract(&cfg, out),
        "enrich" => run_enrich(&cfg, out),
        "affinity" => run_affinity(&cfg, out),
        "geo" => run_geo(&cfg, out),
        "exposure" => run_exposure(&cfg, out),
        "netscope" => run_netscope(&cfg, out),
        "report" => run_report(&cfg, out),
        other => Err(StageError::Config(format!("unknown stage {other:?}"))),
    }
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub total_samples: u64,
    pub samples_with_target: u64,
    pub samples_with_dropzone: u64,
    pub target_coverage_fraction: f64,
    pub dropzone_coverage_fraction: f64,
    pub target_coverage_percent: String,
    pub dropzone_coverage_percent: String,
    pub empty_corpus: bool,
    pub occurrences: RoleCounts,
    pub unique_targets: u64,
    pub unique_dropzones: u64,
    pub masked_merged: Vec<Prefix>,
    pub masked_raw: Vec<Prefix>,
    pub masked_breakdown: Vec<LengthBreakdownRow>,
    pub mask_diagnostics: u64,
    pub errors: Vec<SampleError>,
    pub artifacts: Vec<String>,
}

fn collect_corpus(input_dir: &Path) -> Result<Vec<SampleInput>, StageError> {
    if !input_dir.is_dir() {
        return Err(StageError::Config(format!(
            "input_dir {} is not a directory",
            input_dir.display()
        )));
    }
    let mut paths: Vec<std::path::PathBuf> = walkdir::WalkDir::new(input_dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| SampleInput::File {
            path,
            family_label: None,
        })
        .collect())
}

fn run_extract(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let input_dir = cfg
        .input_dir
        .as_ref()
        .ok_or_else(|| StageError::Config("input_dir is required for extract".to_string()))?;
    let inputs = collect_corpus(input_dir)?;
    let manifest = match &cfg.role_manifest {
        Some(path) => Some(
            RoleManifest::from_path(path)
                .map_err(|e| StageError::Config(format!("role_manifest: {e}")))?,
        ),
        None => None,
    };
    let policy = cfg.extraction_policy();
    let report = extract_corpus(&inputs, &policy, manifest.as_ref());
    write_extract_outputs(&report, out)
}

/// Shared by the CLI stage and tests that build reports in memory.
pub fn write_extract_outputs(report: &ExtractionReport, out: &Path) -> Result<(), StageError> {
    let hits: Vec<&EndpointHit> = report
        .samples
        .iter()
        .flat_map(|s| s.hits.iter())
        .collect();
    art::write_jsonl(&out.join(art::HITS), &hits)?;

    let summary = ExtractSummary {
        total_samples: report.coverage.total_samples,
        samples_with_target: report.coverage.samples_with_target,
        samples_with_dropzone: report.coverage.samples_with_dropzone,
        target_coverage_fraction: report.coverage.target_fraction,
        dropzone_coverage_fraction: report.coverage.dropzone_fraction,
        target_coverage_percent: report.coverage.target_percent.clone(),
        dropzone_coverage_percent: report.coverage.dropzone_percent.clone(),
        empty_corpus: report.coverage.empty_corpus,
        occurrences: report.occurrences,
        unique_targets: report.unique_targets.len() as u64,
        unique_dropzones: report.unique_dropzones.len() as u64,
        masked_merged: report.masked_endpoints.prefixes().to_vec(),
        masked_raw: report.masked_raw.clone(),
        masked_breakdown: atlas_core::ipspace::length_breakdown(&report.masked_raw),
        mask_diagnostics: report
            .samples
            .iter()
            .map(|s| s.diagnostics.len() as u64)
            .sum(),
        errors: report.errors.clone(),
        artifacts: vec![art::HITS.to_string()],
    };
    art::write_json(&out.join(art::EXTRACT_SUMMARY), &summary)
}

// ----------------------------------------------------------------- enrich

/// Data-state view of one side of the store after a batch. The
/// cached-vs-fetched transport split deliberately stays out: it varies
/// with cache warmth and would break byte-identical stage re-runs.
#[derive(Debug, Serialize, Deserialize)]
pub struct SideSummary {
    pub resolved: u64,
    pub not_found: u64,
    pub errors: u64,
}

impl From<SideCounts> for SideSummary {
    fn from(c: SideCounts) -> Self {
        SideSummary {
            resolved: c.cached + c.fetched,
            not_found: c.not_found,
            errors: c.errors,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EnrichSummary {
    pub addresses_requested: u64,
    pub geo: SideSummary,
    pub scan: SideSummary,
    pub offline: bool,
    pub errors: Vec<(Ipv4Addr, String)>,
    pub artifacts: Vec<String>,
}

struct Providers {
    geo: Option<Box<dyn GeoProvider>>,
    scan: Option<Box<dyn ScanProvider>>,
}

fn fixture_providers(cfg: &PipelineConfig) -> Result<Providers, StageError> {
    let geo: Option<Box<dyn GeoProvider>> = match &cfg.geo_fixture {
        Some(path) => Some(Box::new(CsvGeoFixture::from_path(path).map_err(|e| {
            StageError::Provider(format!("geo fixture: {e}"))
        })?)),
        None => None,
    };
    let scan: Option<Box<dyn ScanProvider>> = match &cfg.scan_fixture {
        Some(path) => Some(Box::new(JsonlScanFixture::from_path(path).map_err(
            |e| StageError::Provider(format!("scan fixture: {e}")),
        )?)),
        None => None,
    };
    Ok(Providers { geo, scan })
}

#[cfg(feature = "live")]
fn live_providers() -> Result<Providers, StageError> {
    let geo = atlas_core::enrich::HttpGeoProvider::from_env()
        .map_err(|e| StageError::Provider(e.to_string()))?;
    let scan = atlas_core::enrich::HttpScanProvider::from_env()
        .map_err(|e| StageError::Provider(e.to_string()))?;
    if geo.is_none() && scan.is_none() {
        return Err(StageError::Provider(
            "offline is false but neither GEO_PROVIDER_URL nor SCAN_PROVIDER_URL is set"
                .to_string(),
        ));
    }
    Ok(Providers {
        geo: geo.map(|p| Box::new(p) as Box<dyn GeoProvider>),
        scan: scan.map(|p| Box::new(p) as Box<dyn ScanProvider>),
    })
}

#[cfg(not(feature = "live"))]
fn live_providers() -> Result<Providers, StageError> {
    Err(StageError::Provider(
        "offline is false but this build has no live providers; rebuild with --features live"
            .to_string(),
    ))
}

fn run_enrich(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let grouped = art::read_hits_grouped(&out.join(art::HITS))?;
    let extract: ExtractSummary = art::read_json(&out.join(art::EXTRACT_SUMMARY))?;

    let mut addresses: BTreeSet<Ipv4Addr> = grouped
        .iter()
        .flat_map(|(_, hits)| hits.iter().filter_map(|h| h.address))
        .collect();

    let providers = if cfg.offline {
        fixture_providers(cfg)?
    } else {
        live_providers()?
    };

    // Scan fixtures are enumerable, so whatever sample of the masked space
    // they cover joins the scope analysis.
    if cfg.offline {
        if let Some(path) = &cfg.scan_fixture {
            let fixture = JsonlScanFixture::from_path(path)
                .map_err(|e| StageError::Provider(format!("scan fixture: {e}")))?;
            let masked =
                atlas_core::ipspace::PrefixSet::normalized_unmerged(extract.masked_raw.clone());
            addresses.extend(
                fixture
                    .addresses()
                    .into_iter()
                    .filter(|a| masked.contains(*a)),
            );
        }
    }

    let cache_path = out.join(art::CACHE);
    let mut store = if cache_path.exists() {
        EnrichmentStore::load_jsonl(&cache_path)
            .map_err(|e| StageError::Other(anyhow::anyhow!("cache: {e}")))?
    } else {
        EnrichmentStore::new()
    };

    let opts = BatchOptions {
        ttl_secs: cfg.cache_ttl_secs(),
        rate_per_sec: cfg.rate_limit_per_sec,
        ..BatchOptions::default()
    };
    let report = enrich_batch(
        &addresses,
        providers.geo.as_deref(),
        providers.scan.as_deref(),
        &mut store,
        &opts,
    );

    store
        .save_jsonl(&cache_path)
        .map_err(|e| StageError::Other(anyhow::anyhow!("cache: {e}")))?;

    let rows: Vec<EnrichedRow> = store
        .iter()
        .map(|(addr, entry)| EnrichedRow::from_entry(addr, entry))
        .collect();
    art::write_jsonl(&out.join(art::ENRICHED), &rows)?;

    let summary = EnrichSummary {
        addresses_requested: addresses.len() as u64,
        geo: SideSummary::from(report.geo),
        scan: SideSummary::from(report.scan),
        offline: cfg.offline,
        errors: report.errors,
        artifacts: vec![art::ENRICHED.to_string()],
    };
    art::write_json(&out.join(art::ENRICH_SUMMARY), &summary)
}

// --------------------------------------------------------------- affinity

#[derive(Debug, Serialize, Deserialize)]
pub struct AffinitySummary {
    pub edge_count: u64,
    pub unique_dropzones: u64,
    pub unique_targets: u64,
    pub samples_with_targets_no_dropzone: u64,
    pub histogram_buckets: Vec<(u64, u64)>,
    pub total_targets: u64,
    pub targets_below_10: u64,
    pub fraction_below_10: f64,
    pub max_multiplicity: u64,
    pub max_degree: u64,
    pub max_degree_dropzone: Option<Ipv4Addr>,
    pub mean_occurrences: f64,
    pub mean_occurrences_display: String,
    pub overlap: OverlapSummary,
    pub artifacts: Vec<String>,
}

fn run_affinity(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let grouped = art::read_hits_grouped(&out.join(art::HITS))?;
    let graph = AttackGraph::from_sample_hits(
        grouped
            .iter()
            .map(|(id, hits)| (id.as_str(), hits.as_slice())),
    );
    write_affinity_outputs(&graph, cfg, out)
}

/// Shared by the CLI stage and tests that build graphs in memory.
pub fn write_affinity_outputs(
    graph: &AttackGraph,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<(), StageError> {
    art::write_jsonl(&out.join(art::EDGES), graph.edges())?;

    let hist = target_histogram(graph);
    let stats = dropzone_stats(graph);
    // The full pair table is quadratic; it stays in memory only when asked
    // for.
    let overlap = pairwise_overlap(graph, cfg.overlap_metric, cfg.emit_pair_table);

    let mut artifacts = vec![art::EDGES.to_string(), art::OVERLAP_BINS.to_string()];
    let bin_rows: Vec<Vec<String>> = overlap
        .bins
        .iter()
        .map(|b| {
            vec![
                b.label.clone(),
                b.count.to_string(),
                format!("{:.6}", b.fraction),
            ]
        })
        .collect();
    art::write_csv(&out.join(art::OVERLAP_BINS), "label,count,fraction", &bin_rows)?;

    let mut overlap_for_summary = overlap;
    if let Some(pairs) = overlap_for_summary.pairs.take() {
        let pair_rows: Vec<Vec<String>> = pairs
            .iter()
            .map(|p| {
                vec![
                    p.a.to_string(),
                    p.b.to_string(),
                    format!("{:.6}", p.value),
                ]
            })
            .collect();
        art::write_csv(
            &out.join(art::OVERLAP_PAIRS),
            "dropzone_a,dropzone_b,metric",
            &pair_rows,
        )?;
        artifacts.push(art::OVERLAP_PAIRS.to_string());
    }

    let summary = AffinitySummary {
        edge_count: graph.edge_count(),
        unique_dropzones: graph.dropzone_targets().len() as u64,
        unique_targets: graph.target_multiplicities().len() as u64,
        samples_with_targets_no_dropzone: graph.diagnostics.samples_with_targets_no_dropzone,
        histogram_buckets: hist.buckets.iter().map(|(k, v)| (*k, *v)).collect(),
        total_targets: hist.total_targets,
        targets_below_10: hist.targets_below_10,
        fraction_below_10: hist.fraction_below_10,
        max_multiplicity: hist.max_multiplicity,
        max_degree: stats.max_degree,
        max_degree_dropzone: stats.max_dropzone,
        mean_occurrences: stats.mean_occurrences,
        mean_occurrences_display: format!("{:.2}", stats.mean_occurrences),
        overlap: overlap_for_summary,
        artifacts,
    };
    art::write_json(&out.join(art::AFFINITY_SUMMARY), &summary)
}

// -------------------------------------------------------------------- geo

#[derive(Debug, Serialize, Deserialize)]
pub struct GeoSummary {
    pub dropzone_table: CountryTable,
    pub target_table: CountryTable,
    pub flow_diagnostics: FlowDiagnostics,
    pub distances_measured: u64,
    pub artifacts: Vec<String>,
}

fn country_csv(table: &CountryTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.country.clone(),
                r.count.to_string(),
                r.percent_display(),
            ]
        })
        .collect()
}

fn run_geo(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let grouped = art::read_hits_grouped(&out.join(art::HITS))?;
    let edges: Vec<atlas_core::affinity::Edge> = art::read_jsonl(&out.join(art::EDGES))?;
    let store = art::load_enriched_store(out)?;
    let graph = AttackGraph::from_edges(edges);

    // Table 1 counts occurrences, so every hit tallies once.
    let country_of = |addr: Ipv4Addr| store.geo(addr).map(|g| g.country.clone());
    let mut dropzone_countries: Vec<Option<String>> = Vec::new();
    let mut target_countries: Vec<Option<String>> = Vec::new();
    for (_, hits) in &grouped {
        for hit in hits {
            if let Some(addr) = hit.address {
                match hit.role {
                    Role::DropzoneCandidate => dropzone_countries.push(country_of(addr)),
                    Role::TargetCandidate => target_countries.push(country_of(addr)),
                    Role::Unknown => {}
                }
            }
        }
    }
    let dropzone_table = country_table(
        dropzone_countries.iter().map(Option::as_deref),
        "dropzone",
        cfg.top_k,
    );
    let target_table = country_table(
        target_countries.iter().map(Option::as_deref),
        "target",
        cfg.top_k,
    );
    art::write_csv(
        &out.join(art::COUNTRIES_DROPZONES),
        "country,count,percent",
        &country_csv(&dropzone_table),
    )?;
    art::write_csv(
        &out.join(art::COUNTRIES_TARGETS),
        "country,count,percent",
        &country_csv(&target_table),
    )?;

    let policy = ClusterPolicy {
        degree_threshold: cfg.min_degree,
        key: cfg.cluster_key,
        radius_scale: 1.0,
    };
    let map = flow_map(&graph, &store, &policy);
    let mut geojson = serde_json::to_string_pretty(&map.to_geojson())
        .map_err(|e| StageError::Other(anyhow::anyhow!("geojson: {e}")))?;
    geojson.push('\n');
    fs::write(out.join(art::FLOW_MAP), geojson)?;

    // Empirical distance distribution over edge occurrences, 2,000 km bins.
    const BUCKET_KM: f64 = 2000.0;
    let mut buckets: BTreeMap<u64, u64> = BTreeMap::new();
    let mut measured = 0u64;
    let point_of = |addr: Ipv4Addr| {
        store
            .geo(addr)
            .and_then(|g| GeoPoint::new(g.latitude, g.longitude).ok())
    };
    for edge in graph.edges() {
        if let (Some(a), Some(b)) = (point_of(edge.dropzone), point_of(edge.target)) {
            let d = haversine_km(a, b);
            *buckets.entry((d / BUCKET_KM) as u64).or_insert(0) += 1;
            measured += 1;
        }
    }
    let distance_rows: Vec<Vec<String>> = buckets
        .iter()
        .map(|(bucket, count)| {
            vec![
                format!("{}", *bucket as f64 * BUCKET_KM),
                format!("{}", (*bucket + 1) as f64 * BUCKET_KM),
                count.to_string(),
            ]
        })
        .collect();
    art::write_csv(
        &out.join(art::DISTANCE_HISTOGRAM),
        "lo_km,hi_km,edges",
        &distance_rows,
    )?;

    let summary = GeoSummary {
        dropzone_table,
        target_table,
        flow_diagnostics: map.diagnostics,
        distances_measured: measured,
        artifacts: vec![
            art::COUNTRIES_DROPZONES.to_string(),
            art::COUNTRIES_TARGETS.to_string(),
            art::FLOW_MAP.to_string(),
            art::DISTANCE_HISTOGRAM.to_string(),
        ],
    };
    art::write_json(&out.join(art::GEO_SUMMARY), &summary)
}

// --------------------------------------------------------------- exposure

#[derive(Debug, Serialize, Deserialize)]
pub struct ExposureSummary {
    pub dropzone_profile: ProfileBrief,
    pub target_profile: ProfileBrief,
    pub amplification_flags: u64,
    pub recommendations: u64,
    pub insufficient_support: Vec<InsufficientSupport>,
    pub untyped_hosts: u64,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileBrief {
    pub population: u64,
    pub covered: u64,
    pub total_open_ports: u64,
}

impl From<&PortProfile> for ProfileBrief {
    fn from(p: &PortProfile) -> Self {
        ProfileBrief {
            population: p.population,
            covered: p.covered,
            total_open_ports: p.total_open_ports,
        }
    }
}

fn port_rows(profile: &PortProfile) -> Vec<Vec<String>> {
    profile
        .per_port
        .iter()
        .map(|(port, hosts)| vec![port.to_string(), hosts.to_string()])
        .collect()
}

fn recommendation_rows(recs: &[Recommendation]) -> Vec<Vec<String>> {
    recs.iter()
        .map(|r| {
            vec![
                r.device_type.clone(),
                r.port.to_string(),
                format!("{:.4}", r.usage_fraction),
                match r.action {
                    RecommendationAction::Close => "close".to_string(),
                    RecommendationAction::Keep => "keep".to_string(),
                },
                r.support.to_string(),
            ]
        })
        .collect()
}

fn role_populations(
    grouped: &[(String, Vec<EndpointHit>)],
) -> (BTreeSet<Ipv4Addr>, BTreeSet<Ipv4Addr>) {
    let mut dropzones = BTreeSet::new();
    let mut targets = BTreeSet::new();
    for (_, hits) in grouped {
        for hit in hits {
            if let Some(addr) = hit.address {
                match hit.role {
                    Role::DropzoneCandidate => {
                        dropzones.insert(addr);
                    }
                    Role::TargetCandidate => {
                        targets.insert(addr);
                    }
                    Role::Unknown => {}
                }
            }
        }
    }
    (dropzones, targets)
}

fn run_exposure(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let grouped = art::read_hits_grouped(&out.join(art::HITS))?;
    let store = art::load_enriched_store(out)?;
    let (dropzones, targets) = role_populations(&grouped);

    let dz_profile = port_profile(&store, &dropzones, "dropzone");
    let tg_profile = port_profile(&store, &targets, "target");
    art::write_csv(
        &out.join(art::PORT_PROFILE_DROPZONES),
        "port,hosts",
        &port_rows(&dz_profile),
    )?;
    art::write_csv(
        &out.join(art::PORT_PROFILE_TARGETS),
        "port,hosts",
        &port_rows(&tg_profile),
    )?;

    let rules = cfg.load_amplification_rules()?;
    let mut flag_rows = Vec::new();
    let mut flag_count = 0u64;
    for (role, profile) in [("dropzone", &dz_profile), ("target", &tg_profile)] {
        for flag in amplification_flags(profile, &rules) {
            flag_count += 1;
            flag_rows.push(vec![
                role.to_string(),
                flag.port.to_string(),
                flag.protocol.clone(),
                flag.hosts.to_string(),
                format!("\"{}\"", flag.note),
            ]);
        }
    }
    art::write_csv(
        &out.join(art::AMPLIFICATION_FLAGS),
        "role,port,protocol,hosts,note",
        &flag_rows,
    )?;

    let cve_rows = |population: &BTreeSet<Ipv4Addr>| -> Vec<Vec<String>> {
        cve_summary(&store, population)
            .iter()
            .map(|row| {
                vec![
                    row.id.clone(),
                    row.severity.as_str().to_string(),
                    row.hosts.to_string(),
                ]
            })
            .collect()
    };
    art::write_csv(
        &out.join(art::CVE_DROPZONES),
        "cve_id,severity,hosts",
        &cve_rows(&dropzones),
    )?;
    art::write_csv(
        &out.join(art::CVE_TARGETS),
        "cve_id,severity,hosts",
        &cve_rows(&targets),
    )?;

    let union: BTreeSet<Ipv4Addr> = dropzones.union(&targets).copied().collect();
    let (clusters, untyped) = device_clusters(&store, &union);
    let (recs, insufficient) =
        closure_recommendations(&clusters, cfg.closure_threshold, cfg.min_support);
    art::write_csv(
        &out.join(art::CLOSURE_RECOMMENDATIONS),
        "device_type,port,usage_fraction,action,support",
        &recommendation_rows(&recs),
    )?;

    let summary = ExposureSummary {
        dropzone_profile: ProfileBrief::from(&dz_profile),
        target_profile: ProfileBrief::from(&tg_profile),
        amplification_flags: flag_count,
        recommendations: recs.len() as u64,
        insufficient_support: insufficient,
        untyped_hosts: untyped,
        artifacts: vec![
            art::PORT_PROFILE_DROPZONES.to_string(),
            art::PORT_PROFILE_TARGETS.to_string(),
            art::AMPLIFICATION_FLAGS.to_string(),
            art::CVE_DROPZONES.to_string(),
            art::CVE_TARGETS.to_string(),
            art::CLOSURE_RECOMMENDATIONS.to_string(),
        ],
    };
    art::write_json(&out.join(art::EXPOSURE_SUMMARY), &summary)
}

// --------------------------------------------------------------- netscope

#[derive(Debug, Serialize, Deserialize)]
pub struct NetscopeSummary {
    pub covered_addresses: u64,
    pub active_hosts: u64,
    pub untyped_hosts: u64,
    pub clusters: u64,
    pub recommendations: u64,
    pub insufficient_support: Vec<InsufficientSupport>,
    pub artifacts: Vec<String>,
}

fn run_netscope(cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let extract: ExtractSummary = art::read_json(&out.join(art::EXTRACT_SUMMARY))?;
    let store = art::load_enriched_store(out)?;

    let scope = build_scope(&extract.masked_raw, &store);
    let rules = cfg.load_amplification_rules()?;
    let report = scope_exposure_with_rules(&scope, &store, &rules, cfg.closure_threshold, cfg.min_support);

    let mut breakdown_rows = Vec::new();
    for (view, rows) in [
        ("raw", &scope.breakdown_raw),
        ("normalized", &scope.breakdown_normalized),
    ] {
        for row in rows {
            breakdown_rows.push(vec![
                view.to_string(),
                row.length.to_string(),
                row.unique_prefixes.to_string(),
                row.covered_addresses.to_string(),
            ]);
        }
    }
    art::write_csv(
        &out.join(art::SCOPE_BREAKDOWN),
        "view,length,unique_prefixes,covered_addresses",
        &breakdown_rows,
    )?;

    let cluster_rows: Vec<Vec<String>> = scope
        .clusters
        .iter()
        .map(|c| vec![c.device_type.clone(), c.member_count().to_string()])
        .collect();
    art::write_csv(&out.join(art::SCOPE_CLUSTERS), "device_type,members", &cluster_rows)?;

    art::write_csv(
        &out.join(art::SCOPE_RECOMMENDATIONS),
        "device_type,port,usage_fraction,action,support",
        &recommendation_rows(&report.recommendations),
    )?;

    let flag_rows: Vec<Vec<String>> = report
        .flags
        .iter()
        .map(|f| {
            vec![
                f.port.to_string(),
                f.protocol.clone(),
                f.hosts.to_string(),
                format!("\"{}\"", f.note),
            ]
        })
        .collect();
    art::write_csv(
        &out.join(art::SCOPE_FLAGS),
        "port,protocol,hosts,note",
        &flag_rows,
    )?;

    let summary = NetscopeSummary {
        covered_addresses: scope.covered_addresses,
        active_hosts: scope.active_hosts,
        untyped_hosts: scope.untyped_hosts,
        clusters: scope.clusters.len() as u64,
        recommendations: report.recommendations.len() as u64,
        insufficient_support: report.insufficient_support,
        artifacts: vec![
            art::SCOPE_BREAKDOWN.to_string(),
            art::SCOPE_CLUSTERS.to_string(),
            art::SCOPE_RECOMMENDATIONS.to_string(),
            art::SCOPE_FLAGS.to_string(),
        ],
    };
    art::write_json(&out.join(art::NETSCOPE_SUMMARY), &summary)
}

// ----------------------------------------------------------------- report

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportManifest {
    pub files: BTreeMap<String, String>,
    pub sections: Vec<String>,
    pub omissions: Vec<String>,
}

fn run_report(_cfg: &PipelineConfig, out: &Path) -> Result<(), StageError> {
    let stages: [(&str, &str); 6] = [
        ("extract", art::EXTRACT_SUMMARY),
        ("enrich", art::ENRICH_SUMMARY),
        ("affinity", art::AFFINITY_SUMMARY),
        ("geo", art::GEO_SUMMARY),
        ("exposure", art::EXPOSURE_SUMMARY),
        ("netscope", art::NETSCOPE_SUMMARY),
    ];

    let report_dir = out.join(art::REPORT_DIR);
    if report_dir.exists() {
        fs::remove_dir_all(&report_dir)?;
    }
    fs::create_dir_all(&report_dir)?;

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut sections = Vec::new();
    let mut omissions = Vec::new();
    for (stage, summary_name) in stages {
        match art::summary_artifacts(out, summary_name) {
            Some(artifacts) => {
                sections.push(stage.to_string());
                let mut bundle = artifacts;
                bundle.push(summary_name.to_string());
                for name in bundle {
                    let source = out.join(&name);
                    let flat = name.replace('/', "_");
                    let dest = report_dir.join(&flat);
                    fs::copy(&source, &dest).map_err(|e| {
                        StageError::Dependency(format!(
                            "artifact {} listed by {stage} but unreadable: {e}",
                            source.display()
                        ))
                    })?;
                    files.insert(flat, art::sha256_file(&dest)?);
                }
            }
            None => omissions.push(stage.to_string()),
        }
    }

    if sections.is_empty() {
        return Err(StageError::Dependency(
            "no stage summaries found; run at least the extract stage first".to_string(),
        ));
    }

    let manifest = ReportManifest {
        files,
        sections,
        omissions,
    };
    art::write_json(&out.join(art::REPORT_MANIFEST), &manifest)
}
