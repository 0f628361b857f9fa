//! Role classification: manifest labels first, context heuristics second.
//!
//! The corpus never states roles explicitly, so classification is policy:
//! fetch-style context (URL scheme, download verb, `:port` suffix) marks a
//! dropzone candidate, address-list regions mark target candidates, and a
//! role manifest overrides both when present.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::scanner::count_endpoint_tokens;
use super::{EndpointHit, Role};
use crate::ipspace::Prefix;

/// Download verbs that mark the surrounding context as fetch-like.
const FETCH_VERBS: &[&str] = &["wget", "tftp", "curl", "GET "];

/// Minimum address-shaped tokens in a context window for the address-list
/// heuristic to fire.
const LIST_MIN_TOKENS: usize = 3;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: expected `sample_id, address_or_prefix, role`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown role {role:?}")]
    UnknownRole { line: usize, role: String },
    #[error("line {line}: bad address or prefix {key:?}")]
    BadKey { line: usize, key: String },
    #[error("reading manifest: {0}")]
    Io(#[from] std::io::Error),
}

/// Explicit (sample, endpoint) -> role labels. The sample field accepts `*`
/// to label an endpoint across the whole corpus.
#[derive(Debug, Clone, Default)]
pub struct RoleManifest {
    entries: HashMap<(String, String), Role>,
}

impl RoleManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Parses line-delimited records: `sample_id, dotted-quad-or-prefix, role`.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut manifest = RoleManifest::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(ManifestError::Malformed {
                    line,
                    text: raw.to_string(),
                });
            }
            let key = canonical_key(fields[1]).ok_or_else(|| ManifestError::BadKey {
                line,
                key: fields[1].to_string(),
            })?;
            let role = match fields[2] {
                "dropzone" | "dropzone-candidate" => Role::DropzoneCandidate,
                "target" | "target-candidate" => Role::TargetCandidate,
                "unknown" => Role::Unknown,
                other => {
                    return Err(ManifestError::UnknownRole {
                        line,
                        role: other.to_string(),
                    })
                }
            };
            manifest.entries.insert((fields[0].to_string(), key), role);
        }
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self, ManifestError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, sample_id: &str, endpoint: &str, role: Role) {
        if let Some(key) = canonical_key(endpoint) {
            self.entries
                .insert((sample_id.to_string(), key), role);
        }
    }

    fn lookup(&self, sample_id: &str, key: &str) -> Option<Role> {
        self.entries
            .get(&(sample_id.to_string(), key.to_string()))
            .or_else(|| self.entries.get(&("*".to_string(), key.to_string())))
            .copied()
    }
}

/// Canonical lookup key for an endpoint: dotted quad for addresses,
/// normalized `base/len` for prefixes.
fn canonical_key(text: &str) -> Option<String> {
    if text.contains('/') {
        Prefix::parse(text, true).ok().map(|(p, _)| p.to_string())
    } else {
        text.parse::<std::net::Ipv4Addr>()
            .ok()
            .map(|a| a.to_string())
    }
}

fn hit_key(hit: &EndpointHit) -> Option<String> {
    if let Some(addr) = hit.address {
        Some(addr.to_string())
    } else {
        hit.mask.map(|p| p.to_string())
    }
}

fn has_port_suffix(context: &str, literal: &str) -> bool {
    if literal.is_empty() {
        return false;
    }
    let bytes = context.as_bytes();
    let mut search = 0;
    while let Some(pos) = context[search..].find(literal) {
        let end = search + pos + literal.len();
        if bytes.get(end) == Some(&b':')
            && bytes.get(end + 1).is_some_and(u8::is_ascii_digit)
        {
            return true;
        }
        search += pos + 1;
    }
    false
}

fn looks_like_fetch_context(hit: &EndpointHit) -> bool {
    let ctx = &hit.context;
    ctx.contains("://")
        || FETCH_VERBS.iter().any(|v| ctx.contains(v))
        || has_port_suffix(ctx, &hit.literal)
}

/// Classifies one hit. Manifest labels take absolute precedence; otherwise
/// fetch-style context wins over the address-list heuristic, and anything
/// else is unknown.
pub fn classify_role(hit: &EndpointHit, manifest: Option<&RoleManifest>) -> Role {
    if let (Some(manifest), Some(key)) = (manifest, hit_key(hit)) {
        if let Some(role) = manifest.lookup(&hit.sample_id, &key) {
            return role;
        }
    }
    if looks_like_fetch_context(hit) {
        return Role::DropzoneCandidate;
    }
    if count_endpoint_tokens(&hit.context) >= LIST_MIN_TOKENS {
        return Role::TargetCandidate;
    }
    Role::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::Ipv4Addr;

    fn hit(literal: &str, context: &str) -> EndpointHit {
        EndpointHit {
            sample_id: "s1".to_string(),
            byte_offset: 0,
            span_len: literal.len(),
            literal: literal.to_string(),
            address: literal.parse::<Ipv4Addr>().ok(),
            mask: None,
            role: Role::Unknown,
            context: context.to_string(),
        }
    }

    #[test]
    fn wget_context_is_dropzone() {
        let h = hit("198.51.100.7", "wget http://198.51.100.7/a");
        assert_eq!(classify_role(&h, None), Role::DropzoneCandidate);
    }

    #[test]
    fn manifest_overrides_heuristic() {
        let h = hit("198.51.100.7", "wget http://198.51.100.7/a");
        let mut manifest = RoleManifest::new();
        manifest.insert("s1", "198.51.100.7", Role::TargetCandidate);
        assert_eq!(
            classify_role(&h, Some(&manifest)),
            Role::TargetCandidate
        );
    }

    #[test]
    fn wildcard_sample_manifest_entry_applies() {
        let h = hit("9.9.9.9", "");
        let manifest = RoleManifest::parse("*, 9.9.9.9, target\n").unwrap();
        assert_eq!(classify_role(&h, Some(&manifest)), Role::TargetCandidate);
    }

    #[test]
    fn isolated_hit_is_unknown() {
        let h = hit("9.9.9.9", "9.9.9.9");
        assert_eq!(classify_role(&h, None), Role::Unknown);
    }

    #[test]
    fn port_suffix_is_dropzone() {
        let h = hit("9.9.9.9", "connect 9.9.9.9:8080 now");
        assert_eq!(classify_role(&h, None), Role::DropzoneCandidate);
        let h = hit("9.9.9.9", "see 9.9.9.9: note");
        assert_eq!(classify_role(&h, None), Role::Unknown);
    }

    #[test]
    fn address_list_region_is_target() {
        let h = hit("60.1.2.3", "60.1.2.3 60.1.2.4 60.1.2.5");
        assert_eq!(classify_role(&h, None), Role::TargetCandidate);
    }

    #[test]
    fn fetch_context_beats_list_heuristic() {
        let h = hit("60.1.2.3", "wget 60.1.2.3 60.1.2.4 60.1.2.5");
        assert_eq!(classify_role(&h, None), Role::DropzoneCandidate);
    }

    #[test]
    fn manifest_parses_prefix_keys_and_comments() {
        let manifest =
            RoleManifest::parse("# comment\n\ns9, 1.2.3.4, dropzone\n*, 41.0.0.0/8, target\n")
                .unwrap();
        assert_eq!(manifest.len(), 2);
        let mut masked = hit("41.x.x.x", "");
        masked.address = None;
        masked.mask = Some("41.0.0.0/8".parse().unwrap());
        masked.sample_id = "zz".to_string();
        assert_eq!(
            classify_role(&masked, Some(&manifest)),
            Role::TargetCandidate
        );
    }

    #[test]
    fn manifest_rejects_bad_lines() {
        assert!(matches!(
            RoleManifest::parse("only,two"),
            Err(ManifestError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            RoleManifest::parse("s1, 1.2.3.4, boss"),
            Err(ManifestError::UnknownRole { .. })
        ));
        assert!(matches!(
            RoleManifest::parse("s1, 1.2.3.999, target"),
            Err(ManifestError::BadKey { .. })
        ));
    }
}
