//! Small shared helpers: fixed-point percent rounding and content hashing.

use sha2::{Digest, Sha256};

/// Rounds `100 * num / den` half-up to hundredths of a percent.
///
/// Returns the percentage expressed in integer hundredths (43.25% -> 4325)
/// so table renderers never go through a lossy float format step.
pub(crate) fn percent_hundredths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    let scaled = num as u128 * 10_000;
    ((scaled * 2 + den as u128) / (2 * den as u128)) as u64
}

/// Renders integer hundredths of a percent as "dd.dd".
pub(crate) fn display_hundredths(hundredths: u64) -> String {
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// SHA-256 of `bytes` as a lowercase hex string; sample identity is the
/// content hash so identical bytes always map to the same id.
pub(crate) fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}
