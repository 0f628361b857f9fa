//! Static analysis toolkit for IPv4 endpoints embedded in IoT malware corpora.
//!
//! The crate is organized around a pipeline:
//!
//! - [`extract`] — scan raw sample bytes for literal and masked IPv4
//!   endpoints, classify dropzone vs. target roles, and aggregate a
//!   corpus-level extraction report.
//! - [`ipspace`] — exact CIDR prefix algebra (parsing, normalization,
//!   membership, address counting) used for masked-endpoint accounting.
//! - [`enrich`] — per-IP geolocation/ASN and internet-scan intelligence via
//!   pluggable providers, with a persistent cache and rate limiting.
//! - [`affinity`] — the dropzone→target bipartite attack graph, degree and
//!   multiplicity statistics, and pairwise shared-target overlap bins.
//! - [`geo`] — geodesic distances, average-position target clustering,
//!   country distribution tables, and GeoJSON flow-map export.
//! - [`exposure`] — active-port profiles, amplification flags, CVE
//!   summaries, device-type clusters, and port-closure recommendations.
//! - [`netscope`] — network-centric expansion of masked endpoints joined
//!   with scan data.
//!
//! Data-parallel drivers (corpus scanning, pairwise overlap) run on rayon
//! when the `parallel` feature is enabled (the default) and fall back to
//! sequential loops otherwise. Every parallel path merges through
//! order-independent reductions, so output is byte-identical across worker
//! counts; `*_seq` variants stay exported for benchmarking the two paths
//! against each other.

pub mod affinity;
pub mod enrich;
pub mod exec;
pub mod exposure;
pub mod extract;
pub mod geo;
pub mod ipspace;
pub mod netscope;

pub(crate) mod util;
