//! Tracker-side acceptance decision for an update file.
//!
//! [`verify`] models exactly what the device does on a received
//! container before installing it, in a fixed order:
//!
//! 1. structural parse (header fields, identifiers, bounds)
//! 2. `table_checksum` over the first 44 bytes
//! 3. app image checksum
//! 4. bootloader image checksum
//! 5. MAC trailer, under [`VerifyPolicy::ChecksumAndMac`] only
//!
//! The first failing check decides the [`RejectCause`]; reports are
//! deterministic.  The function consumes raw bytes rather than a
//! parsed value so that structurally broken input still yields a
//! report instead of an error: a verifier that can error out is a
//! verifier that can be bypassed.
//!
//! Under [`VerifyPolicy::ChecksumOnly`] — the policy the device
//! actually ships with — all five checksum fields are attacker
//! recomputable, so acceptance means nothing against a modifying
//! adversary; see [`crate::patch::resign`].

use crate::container::{parse_update, ImageRole, ParseError, TABLE_LEN};
use crate::crc32::crc32;
use crate::mac::{verify_mac, MacKey, MacStatus};

/// What the verifier requires of an update.
#[derive(Clone, Debug)]
pub enum VerifyPolicy {
    /// Structural checks and CRC-32 checksums only.
    ChecksumOnly,
    /// Checksums plus an HMAC-SHA-256 trailer under a per-device key.
    ///
    /// This is the extension point for stronger policies; a signature
    /// check would slot in as another variant.
    ChecksumAndMac { key: MacKey },
}

/// First check that failed, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectCause {
    BadTableVersion,
    BadTableLength,
    TableChecksumMismatch,
    ImageChecksumMismatch(ImageRole),
    /// Header structurally unusable: truncated input, payload bounds
    /// outside the file, or a broken identifier table.
    BoundsError,
    MacMissing,
    MacMismatch,
}

impl core::fmt::Display for RejectCause {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RejectCause::BadTableVersion => f.write_str("bad-table-version"),
            RejectCause::BadTableLength => f.write_str("bad-table-length"),
            RejectCause::TableChecksumMismatch => f.write_str("table-checksum-mismatch"),
            RejectCause::ImageChecksumMismatch(role) => {
                write!(f, "image-checksum-mismatch:{role}")
            }
            RejectCause::BoundsError => f.write_str("bounds-error"),
            RejectCause::MacMissing => f.write_str("mac-missing"),
            RejectCause::MacMismatch => f.write_str("mac-mismatch"),
        }
    }
}

/// Verdict of one [`verify`] run.  Versions are reported only on
/// acceptance: a rejected update never gets to claim a version.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerificationReport {
    Accept { app_version: u32, boot_version: u32 },
    Reject(RejectCause),
}

impl VerificationReport {
    pub fn is_accept(&self) -> bool {
        matches!(self, VerificationReport::Accept { .. })
    }

    pub fn cause(&self) -> Option<RejectCause> {
        match self {
            VerificationReport::Accept { .. } => None,
            VerificationReport::Reject(cause) => Some(*cause),
        }
    }
}

fn structural_cause(err: ParseError) -> RejectCause {
    match err {
        ParseError::BadTableVersion(_) => RejectCause::BadTableVersion,
        ParseError::BadTableLength(_) => RejectCause::BadTableLength,
        // Truncation and identifier-table breakage leave the device
        // without a usable header; reported uniformly.
        ParseError::TooShort { .. }
        | ParseError::BoundsError
        | ParseError::DuplicateIdentifier(_)
        | ParseError::UnknownIdentifier(_) => RejectCause::BoundsError,
    }
}

/// Run the device's acceptance checks over raw update bytes.
pub fn verify(bytes: &[u8], policy: &VerifyPolicy) -> VerificationReport {
    let parsed = match parse_update(bytes) {
        Ok(parsed) => parsed,
        Err(err) => return VerificationReport::Reject(structural_cause(err)),
    };

    if crc32(&bytes[..TABLE_LEN as usize]) != parsed.header.table_checksum {
        return VerificationReport::Reject(RejectCause::TableChecksumMismatch);
    }

    for role in [ImageRole::App, ImageRole::Boot] {
        // Both roles are present in any header parse_update accepts.
        let Some(entry) = parsed.header.entry(role) else {
            return VerificationReport::Reject(RejectCause::BoundsError);
        };
        if crc32(parsed.payload(role)) != entry.checksum {
            return VerificationReport::Reject(RejectCause::ImageChecksumMismatch(role));
        }
    }

    if let VerifyPolicy::ChecksumAndMac { key } = policy {
        match verify_mac(bytes, key) {
            MacStatus::Valid => {}
            MacStatus::Missing => return VerificationReport::Reject(RejectCause::MacMissing),
            MacStatus::Mismatch => return VerificationReport::Reject(RejectCause::MacMismatch),
        }
    }

    let app_version = parsed.header.entry(ImageRole::App).map(|e| e.version).unwrap_or(0);
    let boot_version = parsed.header.entry(ImageRole::Boot).map(|e| e.version).unwrap_or(0);
    VerificationReport::Accept { app_version, boot_version }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{build_update, serialize_update};
    use crate::mac::attach_mac;
    use alloc::vec::Vec;

    fn sample_bytes() -> Vec<u8> {
        let u = build_update(&[0x10, 0x20, 0x30, 0x40], &[0x50, 0x60], 100, 200).unwrap();
        serialize_update(&u).unwrap()
    }

    fn key(b: u8) -> MacKey {
        MacKey::new([b; 32])
    }

    #[test]
    fn fresh_build_accepts() {
        let report = verify(&sample_bytes(), &VerifyPolicy::ChecksumOnly);
        assert_eq!(report, VerificationReport::Accept { app_version: 100, boot_version: 200 });
    }

    #[test]
    fn empty_payload_build_accepts() {
        let u = build_update(&[], &[], 1, 2).unwrap();
        let b = serialize_update(&u).unwrap();
        assert!(verify(&b, &VerifyPolicy::ChecksumOnly).is_accept());
    }

    #[test]
    fn payload_flip_rejects_with_image_cause() {
        let mut b = sample_bytes();
        b[49] ^= 0xFF; // inside app payload
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::ImageChecksumMismatch(ImageRole::App))
        );
        let mut b = sample_bytes();
        let last = b.len() - 1;
        b[last] ^= 0x01; // inside boot payload
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::ImageChecksumMismatch(ImageRole::Boot))
        );
    }

    #[test]
    fn header_flip_rejects_on_table_checksum() {
        // Version field is covered by table_checksum but by no image
        // checksum.
        let mut b = sample_bytes();
        b[20] ^= 0x01;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::TableChecksumMismatch)
        );
        // So is the reserved field, which parsing ignores.
        let mut b = sample_bytes();
        b[6] = 0xAB;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::TableChecksumMismatch)
        );
    }

    #[test]
    fn structural_causes() {
        assert_eq!(
            verify(&[0u8; 10], &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::BoundsError)
        );
        let mut b = sample_bytes();
        b[0] = 9;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::BadTableVersion)
        );
        let mut b = sample_bytes();
        b[2] = 0;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::BadTableLength)
        );
        let mut b = sample_bytes();
        b[12..16].copy_from_slice(&0xFFFFu32.to_le_bytes()); // app length out of range
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::BoundsError)
        );
    }

    #[test]
    fn first_failure_wins() {
        // Corrupt a header byte and a payload byte: the table checksum
        // is checked first.
        let mut b = sample_bytes();
        b[20] ^= 0x01;
        b[49] ^= 0x01;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly).cause(),
            Some(RejectCause::TableChecksumMismatch)
        );
        // Corrupt both payloads: app is reported, not boot.
        let mut b = sample_bytes();
        b[49] ^= 0x01;
        let last = b.len() - 1;
        b[last] ^= 0x01;
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly).cause(),
            Some(RejectCause::ImageChecksumMismatch(ImageRole::App))
        );
    }

    #[test]
    fn mac_policy() {
        let b = sample_bytes();
        let k = key(0x11);
        let policy = VerifyPolicy::ChecksumAndMac { key: k.clone() };

        // Untagged: checksums pass, MAC missing.
        assert_eq!(
            verify(&b, &policy),
            VerificationReport::Reject(RejectCause::MacMissing)
        );

        // Properly tagged: accepted, and still accepted by a
        // checksum-only consumer that ignores the trailer.
        let tagged = attach_mac(&b, &k).unwrap();
        assert_eq!(
            verify(&tagged, &policy),
            VerificationReport::Accept { app_version: 100, boot_version: 200 }
        );
        assert!(verify(&tagged, &VerifyPolicy::ChecksumOnly).is_accept());

        // Tagged under the wrong key.
        let wrong = attach_mac(&b, &key(0x22)).unwrap();
        assert_eq!(
            verify(&wrong, &policy),
            VerificationReport::Reject(RejectCause::MacMismatch)
        );
    }

    #[test]
    fn checksum_failures_beat_mac_failures() {
        // Fixed check order: a corrupted payload is reported as a
        // checksum mismatch even though the MAC would also fail.
        let k = key(0x33);
        let policy = VerifyPolicy::ChecksumAndMac { key: k.clone() };
        let mut tagged = attach_mac(&sample_bytes(), &k).unwrap();
        tagged[49] ^= 0x01;
        assert_eq!(
            verify(&tagged, &policy).cause(),
            Some(RejectCause::ImageChecksumMismatch(ImageRole::App))
        );
    }

    #[test]
    fn cause_display_names() {
        use alloc::string::ToString;
        assert_eq!(RejectCause::TableChecksumMismatch.to_string(), "table-checksum-mismatch");
        assert_eq!(
            RejectCause::ImageChecksumMismatch(ImageRole::App).to_string(),
            "image-checksum-mismatch:app"
        );
        assert_eq!(RejectCause::MacMissing.to_string(), "mac-missing");
    }
}
