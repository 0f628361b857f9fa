//! Corpus-level extraction: per-sample fan-out, order-independent merge.

use std::collections::BTreeSet;
use std::fs;
use std::net::Ipv4Addr;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::policy::ExtractionPolicy;
use super::roles::{classify_role, RoleManifest};
use super::scanner::{scan_sample, MaskDiagnostic};
use super::{EndpointHit, MalwareSample, Role};
use crate::exec;
use crate::ipspace::{Prefix, PrefixSet};
use crate::util::{display_hundredths, percent_hundredths};

/// One corpus member: either bytes already in memory or a file to read at
/// scan time.
#[derive(Debug, Clone)]
pub enum SampleInput {
    Bytes {
        name: String,
        family_label: Option<String>,
        bytes: Vec<u8>,
    },
    File {
        path: PathBuf,
        family_label: Option<String>,
    },
}

impl SampleInput {
    fn source_path(&self) -> String {
        match self {
            SampleInput::Bytes { name, .. } => name.clone(),
            SampleInput::File { path, .. } => path.display().to_string(),
        }
    }
}

/// A sample that could not be scanned; the rest of the corpus is unaffected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleError {
    pub source_path: String,
    pub message: String,
}

/// Scanned hits for one sample, in offset order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleExtraction {
    pub sample: MalwareSample,
    pub hits: Vec<EndpointHit>,
    pub diagnostics: Vec<MaskDiagnostic>,
}

/// Occurrence totals per role. Every hit counts; uniqueness is tracked
/// separately, matching the corpus's dual occurrences-vs-uniques reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub dropzone: u64,
    pub target: u64,
    pub unknown: u64,
}

impl RoleCounts {
    fn bump(&mut self, role: Role) {
        match role {
            Role::DropzoneCandidate => self.dropzone += 1,
            Role::TargetCandidate => self.target += 1,
            Role::Unknown => self.unknown += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.dropzone + self.target + self.unknown
    }
}

/// Per-role sample coverage. Unreadable samples stay in the denominator:
/// they are part of the corpus even though their contents are unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub total_samples: u64,
    pub samples_with_target: u64,
    pub samples_with_dropzone: u64,
    pub target_fraction: f64,
    pub dropzone_fraction: f64,
    /// Half-up two-decimal percent renderings of the fractions.
    pub target_percent: String,
    pub dropzone_percent: String,
    pub empty_corpus: bool,
}

/// Deduplicated corpus-level extraction report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractionReport {
    /// Sorted by (sample_id, source_path); hit lists keep scan order.
    pub samples: Vec<SampleExtraction>,
    pub unique_targets: BTreeSet<Ipv4Addr>,
    pub unique_dropzones: BTreeSet<Ipv4Addr>,
    /// Fully normalized (merged) masked endpoint space.
    pub masked_endpoints: PrefixSet,
    /// Masked prefixes at their extracted granularity, deduplicated.
    pub masked_raw: Vec<Prefix>,
    pub occurrences: RoleCounts,
    pub coverage: Coverage,
    pub errors: Vec<SampleError>,
}

impl ExtractionReport {
    /// Addresses for a role's unique set.
    pub fn unique_for(&self, role: Role) -> Option<&BTreeSet<Ipv4Addr>> {
        match role {
            Role::TargetCandidate => Some(&self.unique_targets),
            Role::DropzoneCandidate => Some(&self.unique_dropzones),
            Role::Unknown => None,
        }
    }
}

fn scan_one(
    input: &SampleInput,
    policy: &ExtractionPolicy,
    manifest: Option<&RoleManifest>,
) -> Result<SampleExtraction, SampleError> {
    let owned;
    let (bytes, family) = match input {
        SampleInput::Bytes {
            bytes,
            family_label,
            ..
        } => (bytes.as_slice(), family_label.clone()),
        SampleInput::File { path, family_label } => {
            owned = fs::read(path).map_err(|e| SampleError {
                source_path: input.source_path(),
                message: e.to_string(),
            })?;
            (owned.as_slice(), family_label.clone())
        }
    };
    let sample = MalwareSample::from_bytes(&input.source_path(), family, bytes);
    let scan = scan_sample(bytes, policy);
    let mut hits = scan.hits;
    for hit in &mut hits {
        hit.sample_id = sample.sample_id.clone();
        hit.role = classify_role(hit, manifest);
    }
    Ok(SampleExtraction {
        sample,
        hits,
        diagnostics: scan.diagnostics,
    })
}

fn assemble(
    results: Vec<Result<SampleExtraction, SampleError>>,
    total_samples: u64,
) -> ExtractionReport {
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => errors.push(e),
        }
    }
    samples.sort_by(|a, b| {
        (&a.sample.sample_id, &a.sample.source_path)
            .cmp(&(&b.sample.sample_id, &b.sample.source_path))
    });
    errors.sort_by(|a, b| a.source_path.cmp(&b.source_path));

    let mut unique_targets = BTreeSet::new();
    let mut unique_dropzones = BTreeSet::new();
    let mut masked_raw: Vec<Prefix> = Vec::new();
    let mut occurrences = RoleCounts::default();
    let mut samples_with_target = 0u64;
    let mut samples_with_dropzone = 0u64;

    for sample in &samples {
        let mut has_target = false;
        let mut has_dropzone = false;
        for hit in &sample.hits {
            occurrences.bump(hit.role);
            match hit.role {
                Role::TargetCandidate => has_target = true,
                Role::DropzoneCandidate => has_dropzone = true,
                Role::Unknown => {}
            }
            if let Some(addr) = hit.address {
                match hit.role {
                    Role::TargetCandidate => {
                        unique_targets.insert(addr);
                    }
                    Role::DropzoneCandidate => {
                        unique_dropzones.insert(addr);
                    }
                    Role::Unknown => {}
                }
            }
            if let Some(prefix) = hit.mask {
                masked_raw.push(prefix);
            }
        }
        if has_target {
            samples_with_target += 1;
        }
        if has_dropzone {
            samples_with_dropzone += 1;
        }
    }
    masked_raw.sort();
    masked_raw.dedup();

    let empty_corpus = total_samples == 0;
    let frac = |n: u64| {
        if empty_corpus {
            0.0
        } else {
            n as f64 / total_samples as f64
        }
    };
    let coverage = Coverage {
        total_samples,
        samples_with_target,
        samples_with_dropzone,
        target_fraction: frac(samples_with_target),
        dropzone_fraction: frac(samples_with_dropzone),
        target_percent: display_hundredths(percent_hundredths(samples_with_target, total_samples)),
        dropzone_percent: display_hundredths(percent_hundredths(
            samples_with_dropzone,
            total_samples,
        )),
        empty_corpus,
    };

    ExtractionReport {
        samples,
        unique_targets,
        unique_dropzones,
        masked_endpoints: PrefixSet::normalized(masked_raw.iter().copied()),
        masked_raw,
        occurrences,
        coverage,
        errors,
    }
}

/// Scans the whole corpus, fanning out per sample when the `parallel`
/// feature is enabled. The merge is order-independent and the output is
/// canonically sorted, so reports are byte-identical across worker counts.
pub fn extract_corpus(
    inputs: &[SampleInput],
    policy: &ExtractionPolicy,
    manifest: Option<&RoleManifest>,
) -> ExtractionReport {
    let results = exec::map_vec(inputs, |input| scan_one(input, policy, manifest));
    assemble(results, inputs.len() as u64)
}

/// Sequential reference path for [`extract_corpus`].
pub fn extract_corpus_seq(
    inputs: &[SampleInput],
    policy: &ExtractionPolicy,
    manifest: Option<&RoleManifest>,
) -> ExtractionReport {
    let results = exec::map_vec_seq(inputs, |input| scan_one(input, policy, manifest));
    assemble(results, inputs.len() as u64)
}
