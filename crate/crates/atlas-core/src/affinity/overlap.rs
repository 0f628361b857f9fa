//! Pairwise shared-target overlap between dropzones.
//!
//! Bin predicates are evaluated with exact integer arithmetic
//! (`5·|A∩B| > 4·|A∪B|` instead of `value > 0.8`), so boundary cases like
//! exactly-80% overlap land deterministically on the declared strict side.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::AttackGraph;
use crate::exec;

/// The ">80%" bin threshold as an exact ratio.
pub const HIGH_OVERLAP_THRESHOLD: (u64, u64) = (4, 5);
/// The "<10%" bin threshold as an exact ratio.
pub const LOW_OVERLAP_THRESHOLD: (u64, u64) = (1, 10);

/// How shared targets are scored. The corpus never defines "overlap", so
/// both readings are selectable; Jaccard is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMetric {
    /// |A∩B| / |A∪B|; equals 1 iff the sets are identical.
    Jaccard,
    /// |A∩B| / min(|A|,|B|); equals 1 iff one set contains the other.
    Containment,
}

impl OverlapMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverlapMetric::Jaccard => "jaccard",
            OverlapMetric::Containment => "containment",
        }
    }
}

/// One evaluated dropzone pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub a: Ipv4Addr,
    pub b: Ipv4Addr,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapBin {
    pub label: String,
    pub count: u64,
    pub fraction: f64,
}

/// Bin counts over all evaluated pairs. The three bins do not partition
/// the population: every 100% case also satisfies >80%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub metric: OverlapMetric,
    pub total_cases: u64,
    pub bins: Vec<OverlapBin>,
    /// Set when the bins overlap each other (always true for the standard
    /// 100% / >80% / <10% bins).
    pub bins_overlap: bool,
    pub pairs: Option<Vec<PairOverlap>>,
}

#[derive(Default)]
struct BinCounts {
    full: u64,
    high: u64,
    low: u64,
}

struct PairEval {
    value: f64,
    full: bool,
    high: bool,
    low: bool,
}

fn evaluate_pair(
    a: &BTreeSet<Ipv4Addr>,
    b: &BTreeSet<Ipv4Addr>,
    metric: OverlapMetric,
) -> PairEval {
    let intersection = a.intersection(b).count() as u64;
    let denominator = match metric {
        OverlapMetric::Jaccard => (a.len() + b.len()) as u64 - intersection,
        OverlapMetric::Containment => a.len().min(b.len()) as u64,
    };
    let (high_num, high_den) = HIGH_OVERLAP_THRESHOLD;
    let (low_num, low_den) = LOW_OVERLAP_THRESHOLD;
    PairEval {
        value: intersection as f64 / denominator as f64,
        full: intersection == denominator,
        high: intersection * high_den > high_num * denominator,
        low: intersection * low_den < low_num * denominator,
    }
}

fn summarize(
    graph: &AttackGraph,
    metric: OverlapMetric,
    include_pairs: bool,
    parallel: bool,
) -> OverlapSummary {
    // All dropzones in the index have nonempty target sets by construction.
    let dropzones: Vec<(Ipv4Addr, &BTreeSet<Ipv4Addr>)> = graph
        .dropzone_targets()
        .iter()
        .map(|(a, t)| (*a, t))
        .collect();
    let n = dropzones.len();
    let indices: Vec<usize> = (0..n.saturating_sub(1)).collect();

    struct Shard {
        counts: BinCounts,
        cases: u64,
        pairs: Vec<PairOverlap>,
    }
    let eval_row = |&i: &usize| {
        let mut shard = Shard {
            counts: BinCounts::default(),
            cases: 0,
            pairs: Vec::new(),
        };
        let (addr_a, set_a) = dropzones[i];
        for &(addr_b, set_b) in &dropzones[i + 1..] {
            let eval = evaluate_pair(set_a, set_b, metric);
            shard.cases += 1;
            if eval.full {
                shard.counts.full += 1;
            }
            if eval.high {
                shard.counts.high += 1;
            }
            if eval.low {
                shard.counts.low += 1;
            }
            if include_pairs {
                shard.pairs.push(PairOverlap {
                    a: addr_a,
                    b: addr_b,
                    value: eval.value,
                });
            }
        }
        shard
    };
    let shards: Vec<Shard> = if parallel {
        exec::map_vec(&indices, eval_row)
    } else {
        exec::map_vec_seq(&indices, eval_row)
    };

    let mut counts = BinCounts::default();
    let mut total_cases = 0u64;
    let mut pairs = Vec::new();
    for shard in shards {
        counts.full += shard.counts.full;
        counts.high += shard.counts.high;
        counts.low += shard.counts.low;
        total_cases += shard.cases;
        pairs.extend(shard.pairs);
    }

    let fraction = |count: u64| {
        if total_cases == 0 {
            0.0
        } else {
            count as f64 / total_cases as f64
        }
    };
    OverlapSummary {
        metric,
        total_cases,
        bins: vec![
            OverlapBin {
                label: "100%".to_string(),
                count: counts.full,
                fraction: fraction(counts.full),
            },
            OverlapBin {
                label: ">80%".to_string(),
                count: counts.high,
                fraction: fraction(counts.high),
            },
            OverlapBin {
                label: "<10%".to_string(),
                count: counts.low,
                fraction: fraction(counts.low),
            },
        ],
        bins_overlap: true,
        pairs: if include_pairs { Some(pairs) } else { None },
    }
}

/// Evaluates every unordered pair of target-bearing dropzones, sharded
/// across workers under the `parallel` feature with order-independent bin
/// accumulation.
pub fn pairwise_overlap(
    graph: &AttackGraph,
    metric: OverlapMetric,
    include_pairs: bool,
) -> OverlapSummary {
    summarize(graph, metric, include_pairs, true)
}

/// Sequential reference path for [`pairwise_overlap`].
pub fn pairwise_overlap_seq(
    graph: &AttackGraph,
    metric: OverlapMetric,
    include_pairs: bool,
) -> OverlapSummary {
    summarize(graph, metric, include_pairs, false)
}
