//! Byte scanners for literal, masked, and raw 32-bit IPv4 endpoints.
//!
//! Literal extraction works on maximal runs of digits and dots: a digit or
//! dot immediately before or after a candidate rejects it, so `1.2.3.4.5`
//! yields nothing. Only an entire run can therefore be a hit, which keeps
//! the scanner linear and makes it provably equivalent to exhaustive
//! substring enumeration under the same boundary rule.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::ExtractionPolicy;
use super::{EndpointHit, Role};
use crate::ipspace::Prefix;

/// A masked endpoint recovered from a wildcard or CIDR token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedEndpoint {
    pub literal: String,
    pub byte_offset: usize,
    pub prefix: Prefix,
}

/// Parse diagnostic for a token that looks masked but cannot be mapped to a
/// prefix (for example a CIDR suffix outside 0..=32).
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("masked token {literal:?} at byte {byte_offset}: {reason}")]
pub struct MaskDiagnostic {
    pub literal: String,
    pub byte_offset: usize,
    pub reason: String,
}

/// Combined per-sample scan output. Hits carry no sample id or role yet;
/// corpus extraction stamps both.
#[derive(Debug, Clone, Default)]
pub struct SampleScan {
    pub hits: Vec<EndpointHit>,
    pub diagnostics: Vec<MaskDiagnostic>,
}

fn is_run_byte(b: u8) -> bool {
    b.is_ascii_digit() || b == b'.'
}

fn is_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b)
}

/// Parses one decimal octet: 1-3 digits, no leading zero, value <= 255.
fn parse_decimal_octet(part: &[u8]) -> Option<u8> {
    if part.is_empty() || part.len() > 3 {
        return None;
    }
    if part.len() > 1 && part[0] == b'0' {
        return None;
    }
    let mut value: u32 = 0;
    for &b in part {
        if !b.is_ascii_digit() {
            return None;
        }
        value = value * 10 + u32::from(b - b'0');
    }
    u8::try_from(value).ok()
}

/// Accepts a token only when it is exactly a valid dotted quad.
fn parse_quad(token: &[u8]) -> Option<u32> {
    let mut address: u32 = 0;
    let mut octets = 0;
    for part in token.split(|&b| b == b'.') {
        octets += 1;
        if octets > 4 {
            return None;
        }
        address = (address << 8) | u32::from(parse_decimal_octet(part)?);
    }
    if octets == 4 {
        Some(address)
    } else {
        None
    }
}

/// Maximal `[0-9.]` runs in `blob` as half-open ranges.
fn digit_dot_runs(blob: &[u8]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < blob.len() {
        if is_run_byte(blob[i]) {
            let start = i;
            while i < blob.len() && is_run_byte(blob[i]) {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }
    runs
}

/// Printable text around a match: up to 32 bytes on each side plus the
/// matched span itself.
fn context_window(blob: &[u8], start: usize, end: usize) -> String {
    let mut s = start;
    let mut taken = 0;
    while s > 0 && taken < 32 && is_printable(blob[s - 1]) {
        s -= 1;
        taken += 1;
    }
    let mut e = end;
    taken = 0;
    while e < blob.len() && taken < 32 && is_printable(blob[e]) {
        e += 1;
        taken += 1;
    }
    String::from_utf8_lossy(&blob[s..e]).into_owned()
}

fn literal_hit(blob: &[u8], start: usize, end: usize, address: u32) -> EndpointHit {
    EndpointHit {
        sample_id: String::new(),
        byte_offset: start,
        span_len: end - start,
        literal: String::from_utf8_lossy(&blob[start..end]).into_owned(),
        address: Some(Ipv4Addr::from(address)),
        mask: None,
        role: Role::Unknown,
        context: context_window(blob, start, end),
    }
}

/// Scans for literal dotted-quad endpoints.
///
/// Offsets are strictly increasing and hits never overlap. Bogon-filtered
/// per the policy; `a.b.c.d/n` reinterpretation is not applied here — use
/// [`scan_sample`] for the combined literal+masked view.
pub fn scan_ascii_ipv4(blob: &[u8], policy: &ExtractionPolicy) -> Vec<EndpointHit> {
    let mut hits = Vec::new();
    for (start, end) in digit_dot_runs(blob) {
        if let Some(address) = parse_quad(&blob[start..end]) {
            if !policy.bogons.contains_u32(address) {
                hits.push(literal_hit(blob, start, end, address));
            }
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Octet {
    Num(u8),
    /// `x` or `X`: word characters, so adjacent letters/digits reject.
    WildAlpha,
    /// `*` or `%d`.
    WildSym,
}

#[derive(Debug)]
struct MaskedToken {
    end: usize,
    octets: [Octet; 4],
    /// Raw CIDR suffix value when one was present.
    cidr: Option<u8>,
}

fn parse_octet_at(blob: &[u8], pos: &mut usize) -> Option<Octet> {
    match blob.get(*pos)? {
        b'x' | b'X' => {
            *pos += 1;
            Some(Octet::WildAlpha)
        }
        b'*' => {
            *pos += 1;
            Some(Octet::WildSym)
        }
        b'%' => {
            if blob.get(*pos + 1) == Some(&b'd') {
                *pos += 2;
                Some(Octet::WildSym)
            } else {
                None
            }
        }
        b if b.is_ascii_digit() => {
            let start = *pos;
            while *pos < blob.len() && *pos - start < 3 && blob[*pos].is_ascii_digit() {
                *pos += 1;
            }
            parse_decimal_octet(&blob[start..*pos]).map(Octet::Num)
        }
        _ => None,
    }
}

/// Tries to parse a masked token (wildcard quad or explicit CIDR) starting
/// at `start`. Boundary bytes are checked on both sides.
fn parse_masked_at(blob: &[u8], start: usize) -> Option<MaskedToken> {
    if start > 0 {
        let prev = blob[start - 1];
        if is_run_byte(prev) {
            return None;
        }
        if matches!(blob[start], b'x' | b'X') && prev.is_ascii_alphanumeric() {
            return None;
        }
    }
    let mut pos = start;
    let mut octets = [Octet::Num(0); 4];
    for (i, slot) in octets.iter_mut().enumerate() {
        if i > 0 {
            if blob.get(pos) != Some(&b'.') {
                return None;
            }
            pos += 1;
        }
        *slot = parse_octet_at(blob, &mut pos)?;
    }
    // Optional /n suffix: 1-2 digits, boundary-checked like the token body.
    let mut cidr = None;
    let mut end = pos;
    if blob.get(pos) == Some(&b'/') {
        let digits_start = pos + 1;
        let mut digits_end = digits_start;
        while digits_end < blob.len()
            && digits_end - digits_start < 2
            && blob[digits_end].is_ascii_digit()
        {
            digits_end += 1;
        }
        let boundary_ok = !matches!(blob.get(digits_end), Some(&b) if is_run_byte(b));
        if digits_end > digits_start && boundary_ok {
            let mut value = 0u8;
            for &b in &blob[digits_start..digits_end] {
                value = value * 10 + (b - b'0');
            }
            cidr = Some(value);
            end = digits_end;
        }
    }
    if let Some(&next) = blob.get(end) {
        if is_run_byte(next) {
            return None;
        }
        if cidr.is_none() && octets[3] == Octet::WildAlpha && next.is_ascii_alphanumeric() {
            return None;
        }
    }
    Some(MaskedToken { end, octets, cidr })
}

enum MaskedOutcome {
    Masked(Prefix),
    /// Token is not maskable (non-trailing wildcard, all-wildcard, or a
    /// plain literal with no mask semantics).
    Absent,
    Malformed(String),
}

fn resolve_masked(token: &MaskedToken) -> MaskedOutcome {
    let wild_count = token
        .octets
        .iter()
        .filter(|o| !matches!(o, Octet::Num(_)))
        .count();
    if let Some(n) = token.cidr {
        if n > 32 {
            return MaskedOutcome::Malformed(format!("CIDR length {n} outside 0..=32"));
        }
        if wild_count > 0 {
            return MaskedOutcome::Malformed(
                "wildcard octets combined with explicit CIDR suffix".to_string(),
            );
        }
        let mut base = 0u32;
        for o in &token.octets {
            if let Octet::Num(v) = o {
                base = (base << 8) | u32::from(*v);
            }
        }
        let (prefix, _zeroed) =
            Prefix::new_normalized(base, n).expect("length checked above");
        return MaskedOutcome::Masked(prefix);
    }
    if wild_count == 0 || wild_count == 4 {
        return MaskedOutcome::Absent;
    }
    // Wildcards must be a trailing block: one -> /24, two -> /16, three -> /8.
    let numeric_len = 4 - wild_count;
    if token.octets[..numeric_len]
        .iter()
        .any(|o| !matches!(o, Octet::Num(_)))
    {
        return MaskedOutcome::Absent;
    }
    let mut base = 0u32;
    for o in &token.octets {
        match o {
            Octet::Num(v) => base = (base << 8) | u32::from(*v),
            _ => base <<= 8,
        }
    }
    let length = (numeric_len * 8) as u8;
    MaskedOutcome::Masked(Prefix::new(base, length).expect("host bits zero by construction"))
}

/// Detects a masked endpoint in a standalone token (wildcard octets from
/// `{x, X, *, %d}` or an explicit `/n` suffix).
///
/// Returns `Ok(None)` for tokens without mask semantics, including
/// wildcards in non-trailing positions. Malformed CIDR suffixes are a
/// diagnostic, not a hit.
pub fn detect_masked(
    token: &str,
    position: usize,
) -> Result<Option<MaskedEndpoint>, MaskDiagnostic> {
    let bytes = token.as_bytes();
    let parsed = match parse_masked_at(bytes, 0) {
        Some(t) if t.end == bytes.len() => t,
        _ => {
            // Not even quad-shaped; a bare trailing "/garbage" is still
            // worth a diagnostic because the author clearly meant a prefix.
            if token.contains('/') {
                return Err(MaskDiagnostic {
                    literal: token.to_string(),
                    byte_offset: position,
                    reason: "unparseable CIDR token".to_string(),
                });
            }
            return Ok(None);
        }
    };
    match resolve_masked(&parsed) {
        MaskedOutcome::Masked(prefix) => Ok(Some(MaskedEndpoint {
            literal: token.to_string(),
            byte_offset: position,
            prefix,
        })),
        MaskedOutcome::Absent => Ok(None),
        MaskedOutcome::Malformed(reason) => Err(MaskDiagnostic {
            literal: token.to_string(),
            byte_offset: position,
            reason,
        }),
    }
}

/// Byte positions where a masked token could begin.
fn masked_start_byte(b: u8) -> bool {
    b.is_ascii_digit() || matches!(b, b'x' | b'X' | b'*' | b'%')
}

struct MaskedScan {
    endpoints: Vec<(usize, usize, MaskedEndpoint)>,
    diagnostics: Vec<MaskDiagnostic>,
}

fn scan_masked(blob: &[u8], policy: &ExtractionPolicy) -> MaskedScan {
    let mut endpoints = Vec::new();
    let mut diagnostics = Vec::new();
    let mut i = 0;
    while i < blob.len() {
        if !masked_start_byte(blob[i]) {
            i += 1;
            continue;
        }
        let digit_start = blob[i].is_ascii_digit();
        if let Some(token) = parse_masked_at(blob, i) {
            let literal = String::from_utf8_lossy(&blob[i..token.end]).into_owned();
            match resolve_masked(&token) {
                MaskedOutcome::Masked(prefix) => {
                    if !policy.bogons.covers_prefix(&prefix) {
                        endpoints.push((
                            i,
                            token.end,
                            MaskedEndpoint {
                                literal,
                                byte_offset: i,
                                prefix,
                            },
                        ));
                    }
                    i = token.end;
                    continue;
                }
                MaskedOutcome::Malformed(reason) => {
                    diagnostics.push(MaskDiagnostic {
                        literal,
                        byte_offset: i,
                        reason,
                    });
                    // Fall through without consuming: a literal quad under a
                    // bad suffix still counts as a literal hit.
                }
                MaskedOutcome::Absent => {}
            }
        }
        i += 1;
        // After a failed digit-started attempt the rest of the run cannot
        // start a token (digit/dot boundaries). A failed wildcard attempt
        // must not eat the digits after it ("X60.1.2.0/24" still holds a
        // CIDR token).
        if digit_start {
            while i < blob.len() && is_run_byte(blob[i]) {
                i += 1;
            }
        }
    }
    MaskedScan {
        endpoints,
        diagnostics,
    }
}

fn scan_raw32(blob: &[u8], policy: &ExtractionPolicy) -> Vec<EndpointHit> {
    let mut hits = Vec::new();
    if blob.len() < 4 {
        return hits;
    }
    for (i, window) in blob.windows(4).enumerate() {
        let address = u32::from_be_bytes([window[0], window[1], window[2], window[3]]);
        if policy.bogons.contains_u32(address) {
            continue;
        }
        hits.push(EndpointHit {
            sample_id: String::new(),
            byte_offset: i,
            span_len: 4,
            literal: Ipv4Addr::from(address).to_string(),
            address: Some(Ipv4Addr::from(address)),
            mask: None,
            role: Role::Unknown,
            context: context_window(blob, i, i + 4),
        });
    }
    hits
}

/// Combined literal + masked (+ optional raw 32-bit) scan of one sample.
///
/// A literal run immediately followed by a valid `/n` suffix is the base of
/// an explicit CIDR token and becomes a masked hit instead of a literal one.
pub fn scan_sample(blob: &[u8], policy: &ExtractionPolicy) -> SampleScan {
    let masked = scan_masked(blob, policy);
    let mut hits: Vec<EndpointHit> = Vec::new();

    let mut claimed_starts: Vec<usize> = masked.endpoints.iter().map(|(s, _, _)| *s).collect();
    claimed_starts.sort_unstable();

    for (start, end) in digit_dot_runs(blob) {
        if claimed_starts.binary_search(&start).is_ok() {
            continue;
        }
        if let Some(address) = parse_quad(&blob[start..end]) {
            if !policy.bogons.contains_u32(address) {
                hits.push(literal_hit(blob, start, end, address));
            }
        }
    }

    for (start, end, endpoint) in masked.endpoints {
        hits.push(EndpointHit {
            sample_id: String::new(),
            byte_offset: start,
            span_len: end - start,
            literal: endpoint.literal,
            address: None,
            mask: Some(endpoint.prefix),
            role: Role::Unknown,
            context: context_window(blob, start, end),
        });
    }

    if policy.raw32 {
        hits.extend(scan_raw32(blob, policy));
    }

    hits.sort_by(|a, b| {
        (a.byte_offset, a.span_len, &a.literal).cmp(&(b.byte_offset, b.span_len, &b.literal))
    });
    SampleScan {
        hits,
        diagnostics: masked.diagnostics,
    }
}

/// Number of address-shaped tokens (valid quads or maskable wildcards) in a
/// context window; used by the address-list role heuristic. No bogon
/// filtering: the question is whether the text looks like a list.
pub(crate) fn count_endpoint_tokens(text: &str) -> usize {
    let blob = text.as_bytes();
    let mut count = 0;
    for (start, end) in digit_dot_runs(blob) {
        if parse_quad(&blob[start..end]).is_some() {
            count += 1;
        }
    }
    let mut i = 0;
    while i < blob.len() {
        if masked_start_byte(blob[i]) {
            let digit_start = blob[i].is_ascii_digit();
            if let Some(token) = parse_masked_at(blob, i) {
                if matches!(resolve_masked(&token), MaskedOutcome::Masked(_)) {
                    count += 1;
                    i = token.end;
                    continue;
                }
            }
            i += 1;
            if digit_start {
                while i < blob.len() && is_run_byte(blob[i]) {
                    i += 1;
                }
            }
        } else {
            i += 1;
        }
    }
    count
}
