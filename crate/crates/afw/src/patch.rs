//! Modify-and-resign toolbox: why CRC "signing" is no signing at all.
//!
//! [`set_version`] and [`patch_bytes`] deliberately leave every
//! checksum untouched, so their output fails verification — exactly
//! what a naive bit-flip attack would produce.  [`resign`] then
//! recomputes both image checksums and the table checksum from the
//! current content.  Since CRC-32 needs no secret, any adversary who
//! can modify the file can run the same computation, and a
//! checksum-only verifier accepts the result.  The detailed pipeline:
//!
//! ```text
//! parse -> set_version / patch_bytes -> resign -> serialize
//! ```
//!
//! turns an authentic update into an arbitrary accepted one.
//!
//! All three operations are pure: they take a parsed value and return
//! a new one.  `resign` never touches payload bytes or version fields;
//! it derives checksums and nothing else, and is therefore idempotent
//! and a no-op on an already consistent value.

use crate::container::{FirmwareUpdate, ImageRole};
use crate::crc32::crc32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchError {
    /// `at + data.len()` runs past the end of the target payload;
    /// patching never resizes an image.
    OutOfRange,
}

impl core::fmt::Display for PatchError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PatchError::OutOfRange => f.write_str("patch range outside image payload"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PatchError {}

/// Return a copy of `u` with the version field of `which` set to
/// `version`.  Checksums are left stale on purpose.
pub fn set_version(u: &FirmwareUpdate, which: ImageRole, version: u32) -> FirmwareUpdate {
    let mut out = u.clone();
    if let Some(entry) = out.header.entry_mut(which) {
        entry.version = version;
    }
    out
}

/// Return a copy of `u` with `data` written into the payload of
/// `which` at payload-relative offset `at`.  Checksums are left stale
/// on purpose; the payload keeps its size.
pub fn patch_bytes(
    u: &FirmwareUpdate,
    which: ImageRole,
    at: u32,
    data: &[u8],
) -> Result<FirmwareUpdate, PatchError> {
    let mut out = u.clone();
    let payload = out.payload_mut(which);
    let end = at as u64 + data.len() as u64;
    if end > payload.len() as u64 {
        return Err(PatchError::OutOfRange);
    }
    payload[at as usize..end as usize].copy_from_slice(data);
    Ok(out)
}

/// Recompute every checksum of `u` from its current content: first
/// both image checksums over the payload bytes, then the table
/// checksum over the resulting 44-byte header.
pub fn resign(u: &FirmwareUpdate) -> FirmwareUpdate {
    let mut out = u.clone();
    for role in [ImageRole::App, ImageRole::Boot] {
        let checksum = crc32(out.payload(role));
        if let Some(entry) = out.header.entry_mut(role) {
            entry.checksum = checksum;
        }
    }
    out.header.table_checksum = crc32(&out.header.table_bytes());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::{build_update, parse_update, serialize_update};
    use crate::verify::{verify, RejectCause, VerificationReport, VerifyPolicy};

    fn sample() -> FirmwareUpdate {
        build_update(&[1, 2, 3, 4, 5, 6], &[7, 8, 9], 2, 2).unwrap()
    }

    #[test]
    fn set_version_leaves_checksums_stale() {
        let u = sample();
        let modified = set_version(&u, ImageRole::App, 0xDEAD_BEEF);
        assert_eq!(modified.header.entry(ImageRole::App).unwrap().version, 0xDEAD_BEEF);
        assert_eq!(modified.app_payload, u.app_payload);
        let b = serialize_update(&modified).unwrap();
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Reject(RejectCause::TableChecksumMismatch)
        );
    }

    #[test]
    fn set_version_to_current_value_is_noop() {
        let u = sample();
        let modified = set_version(&u, ImageRole::App, 2);
        assert_eq!(modified, u);
        assert!(verify(&serialize_update(&modified).unwrap(), &VerifyPolicy::ChecksumOnly)
            .is_accept());
    }

    #[test]
    fn resign_after_version_bump_accepts_and_reports_new_version() {
        let u = resign(&set_version(&sample(), ImageRole::App, 0xDEAD_BEEF));
        let b = serialize_update(&u).unwrap();
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Accept { app_version: 0xDEAD_BEEF, boot_version: 2 }
        );
    }

    #[test]
    fn patch_bytes_in_place() {
        let u = sample();
        let patched = patch_bytes(&u, ImageRole::Boot, 1, &[0xEE, 0xFF]).unwrap();
        assert_eq!(patched.boot_payload, &[7, 0xEE, 0xFF]);
        assert_eq!(patched.app_payload, u.app_payload);
        // Stale until resigned.
        let b = serialize_update(&patched).unwrap();
        assert_eq!(
            verify(&b, &VerifyPolicy::ChecksumOnly).cause(),
            Some(RejectCause::ImageChecksumMismatch(ImageRole::Boot))
        );
        let b = serialize_update(&resign(&patched)).unwrap();
        assert!(verify(&b, &VerifyPolicy::ChecksumOnly).is_accept());
    }

    #[test]
    fn patch_bytes_empty_write_changes_nothing() {
        let u = sample();
        assert_eq!(patch_bytes(&u, ImageRole::App, 3, &[]).unwrap(), u);
        assert_eq!(patch_bytes(&u, ImageRole::App, 6, &[]).unwrap(), u);
    }

    #[test]
    fn patch_bytes_out_of_range() {
        let u = sample();
        assert_eq!(
            patch_bytes(&u, ImageRole::App, 5, &[0, 0]).unwrap_err(),
            PatchError::OutOfRange
        );
        assert_eq!(
            patch_bytes(&u, ImageRole::App, 7, &[]).unwrap_err(),
            PatchError::OutOfRange
        );
        // Offset arithmetic must not wrap.
        assert_eq!(
            patch_bytes(&u, ImageRole::App, u32::MAX, &[1, 2]).unwrap_err(),
            PatchError::OutOfRange
        );
    }

    #[test]
    fn resign_is_idempotent_and_fixpoint_on_consistent_input() {
        let u = sample();
        // build_update output is already consistent.
        assert_eq!(resign(&u), u);
        let modified = patch_bytes(&u, ImageRole::App, 0, &[0xAA]).unwrap();
        let once = resign(&modified);
        assert_eq!(resign(&once), once);
        // resign only rewrites checksum fields.
        assert_eq!(once.app_payload, modified.app_payload);
        assert_eq!(once.boot_payload, modified.boot_payload);
        assert_eq!(
            once.header.entry(ImageRole::App).unwrap().version,
            modified.header.entry(ImageRole::App).unwrap().version
        );
    }

    #[test]
    fn full_attack_pipeline_on_bytes() {
        // parse -> modify -> resign -> serialize: accepted again.
        let original = serialize_update(&sample()).unwrap();
        let parsed = parse_update(&original).unwrap();
        let modified = set_version(
            &patch_bytes(&parsed, ImageRole::App, 2, &[0x90, 0x90]).unwrap(),
            ImageRole::App,
            0xDEAD_BEEF,
        );
        let forged = serialize_update(&resign(&modified)).unwrap();
        assert_ne!(forged, original);
        assert_eq!(
            verify(&forged, &VerifyPolicy::ChecksumOnly),
            VerificationReport::Accept { app_version: 0xDEAD_BEEF, boot_version: 2 }
        );
    }
}
