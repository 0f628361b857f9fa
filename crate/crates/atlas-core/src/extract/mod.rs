//! Static IPv4 endpoint extraction from binary malware samples.
//!
//! The scanner is ASCII dotted-quad based: a candidate token is a maximal
//! run of digits and dots, accepted only when the whole run parses as a
//! valid quad (octets 0..=255, no leading zeros) and survives the policy's
//! bogon filter. Masked endpoints (`41.x.x.x`, `189.34.5.%d`, explicit
//! `a.b.c.d/n`) are detected by a companion tokenizer and carried as
//! [`ipspace::Prefix`](crate::ipspace::Prefix) masks instead of addresses.
//!
//! Corpus-level extraction fans out per sample (rayon under the `parallel`
//! feature) and merges through order-independent reduction, so the report
//! is byte-identical regardless of worker count.

mod corpus;
mod policy;
mod roles;
mod scanner;

pub use corpus::{
    extract_corpus, extract_corpus_seq, Coverage, ExtractionReport, RoleCounts, SampleError,
    SampleExtraction, SampleInput,
};
pub use policy::ExtractionPolicy;
pub use roles::{classify_role, ManifestError, RoleManifest};
pub use scanner::{
    detect_masked, scan_ascii_ipv4, scan_sample, MaskDiagnostic, MaskedEndpoint, SampleScan,
};

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::ipspace::Prefix;
use crate::util::content_hash;

/// Classified role of an extracted endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "dropzone-candidate")]
    DropzoneCandidate,
    #[serde(rename = "target-candidate")]
    TargetCandidate,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::DropzoneCandidate => "dropzone-candidate",
            Role::TargetCandidate => "target-candidate",
            Role::Unknown => "unknown",
        }
    }
}

/// Identity and provenance of one corpus sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalwareSample {
    /// SHA-256 of the sample bytes, lowercase hex.
    pub sample_id: String,
    pub byte_length: u64,
    pub source_path: String,
    pub family_label: Option<String>,
}

impl MalwareSample {
    /// Builds the identity record for `bytes`; the id is the content hash,
    /// so equal bytes always produce equal ids.
    pub fn from_bytes(source_path: &str, family_label: Option<String>, bytes: &[u8]) -> Self {
        MalwareSample {
            sample_id: content_hash(bytes),
            byte_length: bytes.len() as u64,
            source_path: source_path.to_string(),
            family_label,
        }
    }
}

/// One extracted IPv4 occurrence.
///
/// `span_len` is the number of sample bytes the match covers. For ASCII
/// hits it equals `literal.len()`; raw 32-bit hits cover 4 bytes while
/// their literal holds the rendered dotted quad.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointHit {
    pub sample_id: String,
    pub byte_offset: usize,
    pub span_len: usize,
    pub literal: String,
    /// Present for literal hits; absent when the endpoint is masked.
    pub address: Option<Ipv4Addr>,
    /// Present for masked endpoints.
    pub mask: Option<Prefix>,
    pub role: Role,
    /// Printable text around the match: up to 32 bytes each side plus the
    /// literal itself.
    pub context: String,
}
