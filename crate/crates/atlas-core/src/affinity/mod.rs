//! Dropzone→target affinity: the bipartite attack graph and its statistics.
//!
//! Edges are attributed per sample: the same (dropzone, target) address
//! pair appearing in two samples counts twice, because the corpus counts
//! attacks as occurrences. Within one sample a pair contributes exactly one
//! edge no matter how many times either literal repeats.

mod overlap;

pub use overlap::{
    pairwise_overlap, pairwise_overlap_seq, OverlapBin, OverlapMetric, OverlapSummary,
    PairOverlap, HIGH_OVERLAP_THRESHOLD, LOW_OVERLAP_THRESHOLD,
};

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::extract::{EndpointHit, ExtractionReport, Role};

/// One attack edge: a dropzone and a target extracted from the same sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub dropzone: Ipv4Addr,
    pub target: Ipv4Addr,
    pub sample_id: String,
}

/// Counters for samples that could not contribute edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    /// Samples with target hits but no dropzone hit.
    pub samples_with_targets_no_dropzone: u64,
    /// Samples with dropzone hits but no target hit.
    pub samples_with_dropzones_no_target: u64,
}

/// Bipartite dropzone→target multigraph keyed by sample.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackGraph {
    edges: Vec<Edge>,
    dropzone_targets: BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>>,
    target_multiplicity: BTreeMap<Ipv4Addr, u64>,
    pub diagnostics: GraphDiagnostics,
}

impl AttackGraph {
    /// Builds the graph from a role-classified extraction report.
    pub fn build(report: &ExtractionReport) -> Self {
        Self::from_sample_hits(
            report
                .samples
                .iter()
                .map(|s| (s.sample.sample_id.as_str(), s.hits.as_slice())),
        )
    }

    /// Builds from per-sample hit lists. For each sample, every unique
    /// (dropzone address, target address) pair becomes one edge.
    pub fn from_sample_hits<'a, I>(samples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [EndpointHit])>,
    {
        let mut edges = Vec::new();
        let mut diagnostics = GraphDiagnostics::default();
        for (sample_id, hits) in samples {
            let mut dropzones = BTreeSet::new();
            let mut targets = BTreeSet::new();
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
            if dropzones.is_empty() && !targets.is_empty() {
                diagnostics.samples_with_targets_no_dropzone += 1;
            }
            if targets.is_empty() && !dropzones.is_empty() {
                diagnostics.samples_with_dropzones_no_target += 1;
            }
            for &d in &dropzones {
                for &t in &targets {
                    edges.push(Edge {
                        dropzone: d,
                        target: t,
                        sample_id: sample_id.to_string(),
                    });
                }
            }
        }
        let mut graph = Self::from_edges(edges);
        graph.diagnostics = diagnostics;
        graph
    }

    /// Builds from an explicit edge list. Exact duplicate
    /// (dropzone, target, sample) triples collapse to one edge.
    pub fn from_edges(mut edges: Vec<Edge>) -> Self {
        edges.sort();
        edges.dedup();
        let mut dropzone_targets: BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>> = BTreeMap::new();
        let mut target_multiplicity: BTreeMap<Ipv4Addr, u64> = BTreeMap::new();
        for edge in &edges {
            dropzone_targets
                .entry(edge.dropzone)
                .or_default()
                .insert(edge.target);
            *target_multiplicity.entry(edge.target).or_insert(0) += 1;
        }
        AttackGraph {
            edges,
            dropzone_targets,
            target_multiplicity,
            diagnostics: GraphDiagnostics::default(),
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> u64 {
        self.edges.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Unique target set per dropzone; nonempty by construction.
    pub fn dropzone_targets(&self) -> &BTreeMap<Ipv4Addr, BTreeSet<Ipv4Addr>> {
        &self.dropzone_targets
    }

    /// Per-target multiplicity: the number of (dropzone, sample) pairs
    /// listing that target.
    pub fn target_multiplicities(&self) -> &BTreeMap<Ipv4Addr, u64> {
        &self.target_multiplicity
    }
}

/// Multiplicity distribution over targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetHistogram {
    /// multiplicity -> number of targets with that multiplicity.
    pub buckets: BTreeMap<u64, u64>,
    pub total_targets: u64,
    pub targets_below_10: u64,
    pub fraction_below_10: f64,
    pub max_multiplicity: u64,
    pub empty: bool,
}

/// Multiplicity distribution, the fraction of targets attacked fewer than
/// 10 times, and the maximum.
pub fn target_histogram(graph: &AttackGraph) -> TargetHistogram {
    let mults = graph.target_multiplicities();
    if mults.is_empty() {
        return TargetHistogram {
            empty: true,
            ..Default::default()
        };
    }
    let mut buckets: BTreeMap<u64, u64> = BTreeMap::new();
    let mut below = 0u64;
    let mut max = 0u64;
    for &m in mults.values() {
        *buckets.entry(m).or_insert(0) += 1;
        if m < 10 {
            below += 1;
        }
        max = max.max(m);
    }
    let total = mults.len() as u64;
    TargetHistogram {
        buckets,
        total_targets: total,
        targets_below_10: below,
        fraction_below_10: below as f64 / total as f64,
        max_multiplicity: max,
        empty: false,
    }
}

/// Per-dropzone degree statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropzoneStats {
    /// (dropzone, unique target count), ascending by address.
    pub degrees: Vec<(Ipv4Addr, u64)>,
    pub unique_dropzones: u64,
    pub max_degree: u64,
    pub max_dropzone: Option<Ipv4Addr>,
    pub total_edge_occurrences: u64,
    /// Total edge occurrences / unique dropzones — the corpus's notion of
    /// average attacks per dropzone.
    pub mean_occurrences: f64,
    pub empty: bool,
}

/// |T_d| per dropzone, the maximum, and mean occurrences per dropzone.
pub fn dropzone_stats(graph: &AttackGraph) -> DropzoneStats {
    let per = graph.dropzone_targets();
    if per.is_empty() {
        return DropzoneStats {
            empty: true,
            ..Default::default()
        };
    }
    let degrees: Vec<(Ipv4Addr, u64)> = per
        .iter()
        .map(|(addr, targets)| (*addr, targets.len() as u64))
        .collect();
    let (max_dropzone, max_degree) = degrees
        .iter()
        .fold((None, 0), |(who, best), (addr, degree)| {
            if *degree > best {
                (Some(*addr), *degree)
            } else {
                (who, best)
            }
        });
    let unique = per.len() as u64;
    let total = graph.edge_count();
    DropzoneStats {
        degrees,
        unique_dropzones: unique,
        max_degree,
        max_dropzone,
        total_edge_occurrences: total,
        mean_occurrences: total as f64 / unique as f64,
        empty: false,
    }
}

/// Builds the graph from a report (free-function form of
/// [`AttackGraph::build`]).
pub fn build_graph(report: &ExtractionReport) -> AttackGraph {
    AttackGraph::build(report)
}
