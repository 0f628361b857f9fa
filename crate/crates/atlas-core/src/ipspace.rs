//! Exact IPv4 CIDR prefix algebra.
//!
//! [`Prefix`] is always canonical (host bits zero). [`PrefixSet`] is a
//! sorted, pairwise-disjoint collection built through [`PrefixSet::normalized`]
//! (duplicates removed, contained prefixes dropped, complete sibling pairs
//! merged) or [`PrefixSet::normalized_unmerged`], which keeps the original
//! granularity for per-length breakdown reporting while still guaranteeing
//! disjointness. Address counting is exact integer arithmetic: the full
//! 0.0.0.0/0 space counts 2^32 without overflow.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors from prefix parsing and construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixError {
    #[error("bad prefix length {0}: must be 0..=32")]
    BadLength(u8),
    #[error("malformed prefix {0:?}: expected a.b.c.d/n")]
    Malformed(String),
    #[error("octet out of range in {0:?}")]
    BadOctet(String),
    #[error("host bits set in {0:?}: base is not canonical for its length")]
    HostBitsSet(String),
}

/// A canonical IPv4 CIDR prefix: `base/length` with all host bits zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: u32,
    length: u8,
}

impl Prefix {
    /// Builds a prefix, rejecting non-canonical bases.
    pub fn new(base: u32, length: u8) -> Result<Self, PrefixError> {
        if length > 32 {
            return Err(PrefixError::BadLength(length));
        }
        let p = Prefix { base, length };
        if base & !p.netmask() != 0 {
            return Err(PrefixError::HostBitsSet(format!(
                "{}/{}",
                Ipv4Addr::from(base),
                length
            )));
        }
        Ok(p)
    }

    /// Builds a prefix, zeroing any host bits. The second tuple element
    /// reports whether bits were actually cleared, so callers can surface a
    /// diagnostic instead of silently accepting sloppy input.
    pub fn new_normalized(base: u32, length: u8) -> Result<(Self, bool), PrefixError> {
        if length > 32 {
            return Err(PrefixError::BadLength(length));
        }
        let mask = if length == 0 { 0 } else { u32::MAX << (32 - length) };
        let canonical = base & mask;
        Ok((
            Prefix {
                base: canonical,
                length,
            },
            canonical != base,
        ))
    }

    /// Parses `"a.b.c.d/n"`, zeroing host bits when `normalize` is set;
    /// otherwise host bits are an error.
    pub fn parse(text: &str, normalize: bool) -> Result<(Self, bool), PrefixError> {
        let (addr_part, len_part) = text
            .split_once('/')
            .ok_or_else(|| PrefixError::Malformed(text.to_string()))?;
        let addr: Ipv4Addr = addr_part
            .parse()
            .map_err(|_| PrefixError::BadOctet(text.to_string()))?;
        let length: u8 = len_part
            .parse()
            .map_err(|_| PrefixError::Malformed(text.to_string()))?;
        if length > 32 {
            return Err(PrefixError::BadLength(length));
        }
        if normalize {
            Prefix::new_normalized(u32::from(addr), length)
        } else {
            Prefix::new(u32::from(addr), length).map(|p| (p, false))
        }
    }

    pub fn base(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.base)
    }

    pub fn base_u32(&self) -> u32 {
        self.base
    }

    pub fn length(&self) -> u8 {
        self.length
    }

    fn netmask(&self) -> u32 {
        if self.length == 0 {
            0
        } else {
            u32::MAX << (32 - self.length)
        }
    }

    /// Last address covered by this prefix.
    pub fn last_u32(&self) -> u32 {
        self.base | !self.netmask()
    }

    /// Number of addresses covered: 2^(32 - length).
    pub fn address_count(&self) -> u64 {
        1u64 << (32 - self.length as u32)
    }

    /// True when `addr` falls inside this prefix.
    pub fn contains_u32(&self, addr: u32) -> bool {
        addr & self.netmask() == self.base
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        self.contains_u32(u32::from(addr))
    }

    /// True when `other` is fully covered by this prefix.
    pub fn contains_prefix(&self, other: &Prefix) -> bool {
        self.length <= other.length && self.contains_u32(other.base)
    }

    /// The sibling that together with `self` forms the parent prefix, or
    /// `None` for /0.
    fn sibling(&self) -> Option<Prefix> {
        if self.length == 0 {
            return None;
        }
        Some(Prefix {
            base: self.base ^ (1u32 << (32 - self.length as u32)),
            length: self.length,
        })
    }

    fn parent(&self) -> Option<Prefix> {
        if self.length == 0 {
            return None;
        }
        let length = self.length - 1;
        let mask = if length == 0 { 0 } else { u32::MAX << (32 - length) };
        Some(Prefix {
            base: self.base & mask,
            length,
        })
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base(), self.length)
    }
}

impl FromStr for Prefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Prefix::parse(s, false).map(|(p, _)| p)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A normalized, disjoint, ordered set of prefixes.
///
/// Serialized as a plain list of prefix strings; deserialization runs the
/// unmerged normalization pass so the disjointness invariant survives
/// hand-edited input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Prefix>", into = "Vec<Prefix>")]
pub struct PrefixSet {
    prefixes: Vec<Prefix>,
}

impl From<Vec<Prefix>> for PrefixSet {
    fn from(prefixes: Vec<Prefix>) -> Self {
        PrefixSet::normalized_unmerged(prefixes)
    }
}

impl From<PrefixSet> for Vec<Prefix> {
    fn from(set: PrefixSet) -> Self {
        set.prefixes
    }
}

impl PrefixSet {
    /// Full normalization: dedup, drop contained prefixes, merge complete
    /// sibling pairs. Idempotent.
    pub fn normalized<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Self {
        let disjoint = Self::normalized_unmerged(prefixes);
        // Sibling aggregation over the disjoint sorted list. Merging two
        // siblings can expose a new merge with the element below, hence the
        // stack walk.
        let mut stack: Vec<Prefix> = Vec::with_capacity(disjoint.prefixes.len());
        for p in disjoint.prefixes {
            stack.push(p);
            while stack.len() >= 2 {
                let top = stack[stack.len() - 1];
                let below = stack[stack.len() - 2];
                let merged = match (below.sibling(), below.parent()) {
                    (Some(sib), Some(parent)) if sib == top => parent,
                    _ => break,
                };
                stack.pop();
                stack.pop();
                stack.push(merged);
            }
        }
        PrefixSet { prefixes: stack }
    }

    /// Dedup and containment removal only; complete sibling pairs are kept
    /// as-is so per-length breakdowns survive. The result is still disjoint,
    /// which is what makes [`PrefixSet::address_count`] exact.
    pub fn normalized_unmerged<I: IntoIterator<Item = Prefix>>(prefixes: I) -> Self {
        let mut sorted: Vec<Prefix> = prefixes.into_iter().collect();
        sorted.sort();
        sorted.dedup();
        let mut kept: Vec<Prefix> = Vec::with_capacity(sorted.len());
        for p in sorted {
            match kept.last() {
                Some(last) if last.contains_prefix(&p) => {}
                _ => kept.push(p),
            }
        }
        PrefixSet { prefixes: kept }
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Prefix> {
        self.prefixes.iter()
    }

    pub fn prefixes(&self) -> &[Prefix] {
        &self.prefixes
    }

    /// Total covered addresses: exact Σ 2^(32-length).
    pub fn address_count(&self) -> u64 {
        self.prefixes.iter().map(Prefix::address_count).sum()
    }

    /// Ordered-search membership test.
    pub fn contains_u32(&self, addr: u32) -> bool {
        // Disjoint and sorted by base, so the only candidate prefix is the
        // last one whose base does not exceed addr.
        let idx = self.prefixes.partition_point(|p| p.base <= addr);
        idx > 0 && self.prefixes[idx - 1].contains_u32(addr)
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        self.contains_u32(u32::from(addr))
    }

    /// True when `other` lies entirely inside this set (used for bogon
    /// filtering of masked endpoints).
    pub fn covers_prefix(&self, other: &Prefix) -> bool {
        let idx = self.prefixes.partition_point(|p| p.base <= other.base);
        idx > 0 && self.prefixes[idx - 1].contains_prefix(other)
    }
}

impl FromIterator<Prefix> for PrefixSet {
    fn from_iter<I: IntoIterator<Item = Prefix>>(iter: I) -> Self {
        PrefixSet::normalized(iter)
    }
}

/// One row of a per-length breakdown: how many unique prefixes of that
/// length, and how much address space they cover before containment dedup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBreakdownRow {
    pub length: u8,
    pub unique_prefixes: u64,
    pub covered_addresses: u64,
}

/// Per-length unique prefix counts over the raw (pre-merge, pre-containment)
/// input. Duplicates are removed first, so the counts are invariant under
/// input duplication. Rows for /8, /16 and /24 are always present; other
/// lengths appear only when observed.
pub fn length_breakdown(prefixes: &[Prefix]) -> Vec<LengthBreakdownRow> {
    let mut unique: Vec<Prefix> = prefixes.to_vec();
    unique.sort();
    unique.dedup();
    let mut by_len: BTreeMap<u8, u64> = BTreeMap::new();
    for len in [8u8, 16, 24] {
        by_len.insert(len, 0);
    }
    for p in &unique {
        *by_len.entry(p.length()).or_insert(0) += 1;
    }
    by_len
        .into_iter()
        .map(|(length, count)| LengthBreakdownRow {
            length,
            unique_prefixes: count,
            covered_addresses: count * (1u64 << (32 - length as u32)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn parse_canonical() {
        let pre = p("41.0.0.0/8");
        assert_eq!(pre.base(), Ipv4Addr::new(41, 0, 0, 0));
        assert_eq!(pre.length(), 8);
        assert_eq!(pre.to_string(), "41.0.0.0/8");
    }

    #[test]
    fn parse_rejects_host_bits() {
        assert_eq!(
            "41.1.0.0/8".parse::<Prefix>().unwrap_err(),
            PrefixError::HostBitsSet("41.1.0.0/8".to_string())
        );
    }

    #[test]
    fn parse_rejects_bad_length() {
        assert_eq!(
            "1.2.3.4/33".parse::<Prefix>().unwrap_err(),
            PrefixError::BadLength(33)
        );
    }

    #[test]
    fn parse_rejects_bad_octets() {
        assert!(matches!(
            "256.0.0.0/8".parse::<Prefix>(),
            Err(PrefixError::BadOctet(_))
        ));
        assert!(matches!(
            "1.2.3.0".parse::<Prefix>(),
            Err(PrefixError::Malformed(_))
        ));
    }

    #[test]
    fn parse_normalize_flag_zeroes_host_bits() {
        let (pre, changed) = Prefix::parse("41.1.0.0/8", true).unwrap();
        assert_eq!(pre, p("41.0.0.0/8"));
        assert!(changed);
        let (pre, changed) = Prefix::parse("41.0.0.0/8", true).unwrap();
        assert_eq!(pre, p("41.0.0.0/8"));
        assert!(!changed);
    }

    #[test]
    fn normalize_removes_contained() {
        let set = PrefixSet::normalized([p("10.0.0.0/8"), p("10.1.0.0/16")]);
        assert_eq!(set.prefixes(), &[p("10.0.0.0/8")]);
    }

    #[test]
    fn normalize_merges_siblings() {
        let set = PrefixSet::normalized([p("1.2.0.0/17"), p("1.2.128.0/17")]);
        assert_eq!(set.prefixes(), &[p("1.2.0.0/16")]);
    }

    #[test]
    fn normalize_cascades_merges() {
        let set = PrefixSet::normalized([
            p("8.0.0.0/10"),
            p("8.64.0.0/10"),
            p("8.128.0.0/9"),
        ]);
        assert_eq!(set.prefixes(), &[p("8.0.0.0/8")]);
    }

    #[test]
    fn unmerged_keeps_siblings_but_stays_disjoint() {
        let set = PrefixSet::normalized_unmerged([
            p("1.2.0.0/17"),
            p("1.2.128.0/17"),
            p("1.2.0.0/17"),
            p("1.2.64.0/18"), // contained in 1.2.0.0/17
        ]);
        assert_eq!(set.prefixes(), &[p("1.2.0.0/17"), p("1.2.128.0/17")]);
        assert_eq!(set.address_count(), 1 << 16);
    }

    #[test]
    fn address_count_examples() {
        assert_eq!(PrefixSet::default().address_count(), 0);
        let full = PrefixSet::normalized([p("0.0.0.0/0")]);
        assert_eq!(full.address_count(), 4_294_967_296);
    }

    #[test]
    fn address_count_paper_breakdown_fixture() {
        // 27 disjoint /24 + 435 /16 + 125 /8.
        let mut prefixes = Vec::new();
        for i in 0..125u32 {
            prefixes.push(Prefix::new((60 + i) << 24, 8).unwrap());
        }
        for i in 0..435u32 {
            let base = if i < 256 {
                (185 << 24) | (i << 16)
            } else {
                (186 << 24) | ((i - 256) << 16)
            };
            prefixes.push(Prefix::new(base, 16).unwrap());
        }
        for i in 0..27u32 {
            prefixes.push(Prefix::new((187 << 24) | (i << 8), 24).unwrap());
        }
        let set = PrefixSet::normalized_unmerged(prefixes.clone());
        assert_eq!(set.len(), 125 + 435 + 27);
        assert_eq!(set.address_count(), 2_125_667_072);

        let rows = length_breakdown(&prefixes);
        let by_len: BTreeMap<u8, u64> =
            rows.iter().map(|r| (r.length, r.unique_prefixes)).collect();
        assert_eq!(by_len[&8], 125);
        assert_eq!(by_len[&16], 435);
        assert_eq!(by_len[&24], 27);
    }

    #[test]
    fn contains_examples() {
        let set = PrefixSet::normalized([p("41.0.0.0/8")]);
        assert!(set.contains(Ipv4Addr::new(41, 200, 3, 9)));
        assert!(!set.contains(Ipv4Addr::new(42, 0, 0, 1)));
    }

    #[test]
    fn breakdown_invariant_under_duplication() {
        let raw = vec![p("9.0.0.0/8"), p("9.0.0.0/8"), p("20.1.0.0/16")];
        let doubled: Vec<Prefix> = raw.iter().chain(raw.iter()).copied().collect();
        assert_eq!(length_breakdown(&raw), length_breakdown(&doubled));
    }

    fn arb_prefix_in_16(base: u32) -> impl Strategy<Value = Prefix> {
        (16u8..=32, 0u32..=0xFFFF).prop_map(move |(len, host)| {
            Prefix::new_normalized(base | host, len).unwrap().0
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(prefixes in prop::collection::vec(arb_prefix_in_16(0x0A25_0000), 0..40)) {
            let once = PrefixSet::normalized(prefixes.clone());
            let twice = PrefixSet::normalized(once.iter().copied());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn normalized_membership_matches_raw_any(
            prefixes in prop::collection::vec(arb_prefix_in_16(0x0A25_0000), 1..25),
            probes in prop::collection::vec(0u32..=0xFFFF, 64),
        ) {
            let set = PrefixSet::normalized(prefixes.clone());
            for host in probes {
                let addr = 0x0A25_0000 | host;
                let expected = prefixes.iter().any(|p| p.contains_u32(addr));
                prop_assert_eq!(set.contains_u32(addr), expected);
            }
        }

        #[test]
        fn normalized_count_never_exceeds_raw_sum(
            prefixes in prop::collection::vec(arb_prefix_in_16(0x0A25_0000), 0..25),
        ) {
            let raw_sum: u64 = prefixes.iter().map(Prefix::address_count).sum();
            let set = PrefixSet::normalized(prefixes.clone());
            prop_assert!(set.address_count() <= raw_sum);
            // Sibling merges preserve coverage, so equality holds exactly
            // when the raw input was already disjoint.
            let unmerged = PrefixSet::normalized_unmerged(prefixes.clone());
            let raw_disjoint = unmerged.len() == prefixes.len();
            prop_assert_eq!(set.address_count() == raw_sum, raw_disjoint);
        }
    }
}
