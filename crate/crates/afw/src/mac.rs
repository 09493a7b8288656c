//! Keyed-MAC trailer: the countermeasure to checksum "signing".
//!
//! CRC-32 is a linear error-detecting code with no secret in it, so
//! anyone who can modify an update can also recompute its checksums.
//! A message authentication code under a per-device symmetric key (the
//! key is provisioned out of band, e.g. at pairing) is the minimal
//! fix: the update server tags each container, the device recomputes
//! the tag and compares.
//!
//! The tag is HMAC-SHA-256 over the entire container and travels in a
//! detachable 36-byte trailer appended after the container bytes:
//!
//! ```text
//! [ container ... ] [ "MAC1" ][ 32-byte HMAC-SHA-256 tag ]
//! ```
//!
//! Appending rather than reformatting keeps the container layout
//! untouched: a checksum-only consumer parses a tagged file exactly as
//! before and simply never looks at the trailer.
//!
//! Detection is by magic: any input whose last 36 bytes start with
//! `"MAC1"` is treated as tagged.  A container whose payload happens
//! to end in such a pattern would be misdetected; acceptable for a
//! trailer scheme, and [`attach_mac`] refuses such inputs.

use alloc::vec::Vec;

use hmac::{Hmac, Mac};
use sha2::Sha256;

/// Magic prefix of the trailer.
pub const MAC_MAGIC: [u8; 4] = *b"MAC1";
/// HMAC-SHA-256 tag length.
pub const MAC_TAG_LEN: usize = 32;
/// Full trailer length: magic plus tag.
pub const MAC_TRAILER_LEN: usize = MAC_MAGIC.len() + MAC_TAG_LEN;
/// Required key length.
pub const MAC_KEY_LEN: usize = 32;

/// A 32-byte symmetric MAC key.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey([u8; MAC_KEY_LEN]);

impl MacKey {
    pub fn new(bytes: [u8; MAC_KEY_LEN]) -> MacKey {
        MacKey(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<MacKey> {
        let arr: [u8; MAC_KEY_LEN] = bytes.try_into().ok()?;
        Some(MacKey(arr))
    }

    pub fn as_bytes(&self) -> &[u8; MAC_KEY_LEN] {
        &self.0
    }
}

impl core::fmt::Debug for MacKey {
    // Never print key material.
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("MacKey(..)")
    }
}

/// Outcome of [`verify_mac`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacStatus {
    Valid,
    /// No well-formed trailer present.
    Missing,
    /// Trailer present but the tag does not match the content.
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacError {
    /// Input already ends in a well-formed trailer.
    AlreadyTagged,
}

impl core::fmt::Display for MacError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MacError::AlreadyTagged => f.write_str("input already carries a MAC trailer"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MacError {}

fn compute_tag(content: &[u8], key: &MacKey) -> [u8; MAC_TAG_LEN] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes())
        .expect("HMAC accepts any key length");
    mac.update(content);
    mac.finalize().into_bytes().into()
}

/// Split `bytes` into (content, tag) if it ends in a well-formed
/// trailer.
pub fn split_trailer(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    if bytes.len() < MAC_TRAILER_LEN {
        return None;
    }
    let (content, trailer) = bytes.split_at(bytes.len() - MAC_TRAILER_LEN);
    if trailer[..MAC_MAGIC.len()] != MAC_MAGIC {
        return None;
    }
    Some((content, &trailer[MAC_MAGIC.len()..]))
}

/// Append a MAC trailer over the whole of `container`.
pub fn attach_mac(container: &[u8], key: &MacKey) -> Result<Vec<u8>, MacError> {
    if split_trailer(container).is_some() {
        return Err(MacError::AlreadyTagged);
    }
    let tag = compute_tag(container, key);
    let mut out = Vec::with_capacity(container.len() + MAC_TRAILER_LEN);
    out.extend_from_slice(container);
    out.extend_from_slice(&MAC_MAGIC);
    out.extend_from_slice(&tag);
    Ok(out)
}

/// Check the MAC trailer of `bytes` under `key`.
///
/// The tag comparison is constant-time (via the HMAC implementation),
/// so the result leaks nothing about the expected tag.
pub fn verify_mac(bytes: &[u8], key: &MacKey) -> MacStatus {
    let Some((content, tag)) = split_trailer(bytes) else {
        return MacStatus::Missing;
    };
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key.as_bytes())
        .expect("HMAC accepts any key length");
    mac.update(content);
    match mac.verify_slice(tag) {
        Ok(()) => MacStatus::Valid,
        Err(_) => MacStatus::Mismatch,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn key(b: u8) -> MacKey {
        MacKey::new([b; MAC_KEY_LEN])
    }

    #[test]
    fn attach_then_verify() {
        let content = b"some container bytes";
        let tagged = attach_mac(content, &key(0x42)).unwrap();
        assert_eq!(tagged.len(), content.len() + MAC_TRAILER_LEN);
        assert_eq!(&tagged[..content.len()], content);
        assert_eq!(&tagged[content.len()..content.len() + 4], b"MAC1");
        assert_eq!(verify_mac(&tagged, &key(0x42)), MacStatus::Valid);
    }

    #[test]
    fn wrong_key_rejected() {
        let tagged = attach_mac(b"data", &key(1)).unwrap();
        assert_eq!(verify_mac(&tagged, &key(2)), MacStatus::Mismatch);
    }

    #[test]
    fn untagged_is_missing() {
        assert_eq!(verify_mac(b"", &key(0)), MacStatus::Missing);
        assert_eq!(verify_mac(b"no trailer here", &key(0)), MacStatus::Missing);
        // Long enough for a trailer but wrong magic.
        assert_eq!(verify_mac(&[0u8; 64], &key(0)), MacStatus::Missing);
    }

    #[test]
    fn tampering_detected() {
        let mut tagged = attach_mac(b"firmware image bytes", &key(7)).unwrap();
        // Flip one content bit.
        tagged[3] ^= 0x01;
        assert_eq!(verify_mac(&tagged, &key(7)), MacStatus::Mismatch);
        tagged[3] ^= 0x01;
        // Flip one tag bit.
        let last = tagged.len() - 1;
        tagged[last] ^= 0x80;
        assert_eq!(verify_mac(&tagged, &key(7)), MacStatus::Mismatch);
    }

    #[test]
    fn double_attach_refused() {
        let tagged = attach_mac(b"data", &key(1)).unwrap();
        assert_eq!(attach_mac(&tagged, &key(1)).unwrap_err(), MacError::AlreadyTagged);
    }

    #[test]
    fn empty_content_tags_fine() {
        let tagged = attach_mac(b"", &key(9)).unwrap();
        assert_eq!(tagged.len(), MAC_TRAILER_LEN);
        assert_eq!(verify_mac(&tagged, &key(9)), MacStatus::Valid);
    }

    // HMAC-SHA-256 test vectors from RFC 4231.  Case 5 is published
    // truncated to 128 bits; the assertion compares that prefix.
    #[test]
    fn rfc4231_vectors() {
        struct Tc {
            key: Vec<u8>,
            data: Vec<u8>,
            tag_hex: &'static str,
        }
        let cases = [
            Tc {
                key: vec![0x0b; 20],
                data: b"Hi There".to_vec(),
                tag_hex: "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7",
            },
            Tc {
                key: b"Jefe".to_vec(),
                data: b"what do ya want for nothing?".to_vec(),
                tag_hex: "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843",
            },
            Tc {
                key: vec![0xaa; 20],
                data: vec![0xdd; 50],
                tag_hex: "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe",
            },
            Tc {
                key: (1..=25).collect(),
                data: vec![0xcd; 50],
                tag_hex: "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b",
            },
            Tc {
                key: vec![0x0c; 20],
                data: b"Test With Truncation".to_vec(),
                tag_hex: "a3b6167473100ee06e0c796c2955552b",
            },
            Tc {
                key: vec![0xaa; 131],
                data: b"Test Using Larger Than Block-Size Key - Hash Key First".to_vec(),
                tag_hex: "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54",
            },
            Tc {
                key: vec![0xaa; 131],
                data: b"This is a test using a larger than block-size key and a larger \
                        than block-size data. The key needs to be hashed before being \
                        used by the HMAC algorithm."
                    .to_vec(),
                tag_hex: "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2",
            },
        ];
        for (i, tc) in cases.iter().enumerate() {
            let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&tc.key).unwrap();
            mac.update(&tc.data);
            let tag: [u8; 32] = mac.finalize().into_bytes().into();
            let got = hex_str(&tag[..tc.tag_hex.len() / 2]);
            assert_eq!(got, tc.tag_hex, "RFC 4231 test case {}", i + 1);
        }
    }

    fn hex_str(bytes: &[u8]) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::new();
        for b in bytes {
            write!(s, "{b:02x}").unwrap();
        }
        s
    }
}
