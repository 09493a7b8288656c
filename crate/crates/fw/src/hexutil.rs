//! Hex conventions shared by the CLI: integers print as lowercase
//! `0x`-prefixed fixed-width hex and parse as either decimal or
//! `0x`-prefixed hex.

use std::path::Path;

use afw::mac::{MacKey, MAC_KEY_LEN};
use anyhow::{bail, Context, Result};

/// Parse a decimal or `0x`-prefixed hex integer.
pub fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid integer {s:?}: {e}"))
}

/// As [`parse_u64`], limited to 32 bits.
pub fn parse_u32(s: &str) -> std::result::Result<u32, String> {
    let v = parse_u64(s)?;
    u32::try_from(v).map_err(|_| format!("{s:?} does not fit in 32 bits"))
}

/// Decode a hex byte string such as `deadbeef` (whitespace ignored,
/// optional `0x` prefix).
pub fn parse_hex_bytes(s: &str) -> Result<Vec<u8>> {
    let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let cleaned = cleaned.strip_prefix("0x").unwrap_or(&cleaned);
    hex::decode(cleaned).with_context(|| format!("invalid hex string {s:?}"))
}

/// Read a 32-byte MAC key from a hex file (64 hex digits, whitespace
/// and an optional `0x` prefix tolerated).
pub fn read_key_file(path: &Path) -> Result<MacKey> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading key file {}", path.display()))?;
    let bytes = parse_hex_bytes(&text)?;
    if bytes.len() != MAC_KEY_LEN {
        bail!(
            "key file {} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            MAC_KEY_LEN
        );
    }
    Ok(MacKey::from_slice(&bytes).expect("length just checked"))
}
