//! Count-leading-zeros as a longest-prefix-match lookup.
//!
//! Entry `i` (1-based) holds a key with only bit `width - i` set and a
//! prefix length of `i`; a key that matches it has exactly `i - 1` leading
//! zeros. Zero matches nothing and maps to `width`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpmEntry {
    pub prefix: u64,
    pub prefix_len: u32,
    pub leading_zeros: u32,
}

impl LpmEntry {
    pub fn matches(&self, key: u64, width: u32) -> bool {
        (key ^ self.prefix) & prefix_mask(self.prefix_len, width) == 0
    }
}

/// Mask selecting the top `len` bits of a `width`-bit word.
pub fn prefix_mask(len: u32, width: u32) -> u64 {
    if len == 0 {
        return 0;
    }
    let low = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    low & !low.checked_shr(len).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpmTable {
    width: u32,
    entries: Vec<LpmEntry>,
}

impl LpmTable {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn entries(&self) -> &[LpmEntry] {
        &self.entries
    }

    /// Longest matching entry, if any.
    pub fn lookup(&self, key: u64) -> Option<&LpmEntry> {
        self.entries
            .iter()
            .filter(|e| e.matches(key, self.width))
            .max_by_key(|e| e.prefix_len)
    }

    /// Dotted-quad CIDR form of an entry (32-bit tables only).
    pub fn cidr(&self, entry: &LpmEntry) -> Option<Cidr> {
        (self.width == 32).then_some(Cidr { addr: entry.prefix as u32, len: entry.prefix_len })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cidr {
    pub addr: u32,
    pub len: u32,
}

impl fmt::Display for Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.addr.to_be_bytes();
        write!(f, "{a}.{b}.{c}.{d}/{}", self.len)
    }
}

/// Builds the CLZ table for a `width`-bit register (16 or 32 in practice).
pub fn build_lpm_table(width: u32) -> LpmTable {
    assert!((2..=64).contains(&width), "unsupported register width {width}");
    let entries = (1..=width)
        .map(|i| LpmEntry { prefix: 1u64 << (width - i), prefix_len: i, leading_zeros: i - 1 })
        .collect();
    LpmTable { width, entries }
}

/// Shared tables for the two register widths the arithmetic supports.
pub fn shared_table(width: u32) -> &'static LpmTable {
    static T16: OnceLock<LpmTable> = OnceLock::new();
    static T32: OnceLock<LpmTable> = OnceLock::new();
    match width {
        16 => T16.get_or_init(|| build_lpm_table(16)),
        32 => T32.get_or_init(|| build_lpm_table(32)),
        _ => panic!("no shared LPM table for width {width}"),
    }
}

/// Leading zeros of `magnitude` within the table's width, via LPM.
pub fn clz_lpm(magnitude: u64, table: &LpmTable) -> u32 {
    table.lookup(magnitude).map_or(table.width, |e| e.leading_zeros)
}
