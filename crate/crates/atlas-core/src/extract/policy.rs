//! Extraction policy: bogon exclusion and scan-mode knobs.

use crate::ipspace::{Prefix, PrefixSet};

/// Reserved/private/unroutable space excluded by default; the analysis is
/// about responsive public endpoints. Fixtures that plant documentation
/// range addresses must override this list.
pub const DEFAULT_BOGONS: &[&str] = &[
    "0.0.0.0/8",
    "10.0.0.0/8",
    "100.64.0.0/10",
    "127.0.0.0/8",
    "169.254.0.0/16",
    "172.16.0.0/12",
    "192.0.2.0/24",
    "192.168.0.0/16",
    "198.18.0.0/15",
    "198.51.100.0/24",
    "203.0.113.0/24",
    "224.0.0.0/3",
    "255.255.255.255/32",
];

/// Knobs for the per-sample scanners.
#[derive(Debug, Clone)]
pub struct ExtractionPolicy {
    /// Addresses inside these prefixes are dropped; masked endpoints fully
    /// contained in a bogon prefix are dropped as well.
    pub bogons: PrefixSet,
    /// Also scan every byte offset as a big-endian 32-bit address. Off by
    /// default: it floods results with false positives on arbitrary
    /// binaries.
    pub raw32: bool,
}

impl Default for ExtractionPolicy {
    fn default() -> Self {
        let prefixes: Vec<Prefix> = DEFAULT_BOGONS
            .iter()
            .map(|s| s.parse().expect("default bogon list parses"))
            .collect();
        ExtractionPolicy {
            bogons: PrefixSet::normalized(prefixes),
            raw32: false,
        }
    }
}

impl ExtractionPolicy {
    /// Policy with no bogon filtering at all (fixture corpora planting
    /// documentation-range addresses).
    pub fn permissive() -> Self {
        ExtractionPolicy {
            bogons: PrefixSet::default(),
            raw32: false,
        }
    }

    pub fn with_bogons(bogons: PrefixSet) -> Self {
        ExtractionPolicy {
            bogons,
            raw32: false,
        }
    }
}
