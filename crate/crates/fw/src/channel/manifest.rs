//! The vendor's update-availability document.
//!
//! Served as JSON from `GET /manifest`.  When an update is available:
//!
//! ```json
//! {"available":true,"firmware_version":2,"url":"/firmware",
//!  "size":5168,"checksum":"0x1c291ca3"}
//! ```
//!
//! and just `{"available":false}` when none is.  The `url` is a path
//! on whatever endpoint the client was configured with — which is why
//! an on-path interceptor keeps control of the firmware fetch too.

use afw::crc32::crc32;
use serde::{Deserialize, Serialize};

use super::ChannelError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateManifest {
    pub available: bool,
    pub firmware_version: u32,
    pub url: String,
    pub size: u64,
    pub checksum: u32,
}

// Wire forms: field order in the JSON follows declaration order.
#[derive(Serialize)]
struct FullWire<'a> {
    available: bool,
    firmware_version: u32,
    url: &'a str,
    size: u64,
    checksum: String,
}

#[derive(Deserialize)]
struct RawWire {
    available: bool,
    #[serde(default)]
    firmware_version: u32,
    #[serde(default)]
    url: String,
    #[serde(default)]
    size: u64,
    #[serde(default)]
    checksum: String,
}

impl UpdateManifest {
    /// "No update" answer; carries nothing else.
    pub fn unavailable() -> UpdateManifest {
        UpdateManifest { available: false, firmware_version: 0, url: String::new(), size: 0, checksum: 0 }
    }

    /// Manifest advertising `firmware` at the conventional path, with
    /// size and checksum derived from the actual bytes.
    pub fn for_firmware(firmware_version: u32, firmware: &[u8]) -> UpdateManifest {
        UpdateManifest {
            available: true,
            firmware_version,
            url: "/firmware".into(),
            size: firmware.len() as u64,
            checksum: crc32(firmware),
        }
    }

    pub fn to_json(&self) -> String {
        if !self.available {
            return r#"{"available":false}"#.into();
        }
        serde_json::to_string(&FullWire {
            available: true,
            firmware_version: self.firmware_version,
            url: &self.url,
            size: self.size,
            checksum: format!("0x{:08x}", self.checksum),
        })
        .expect("manifest serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<UpdateManifest, ChannelError> {
        let raw: RawWire =
            serde_json::from_str(text).map_err(|e| ChannelError::Manifest(e.to_string()))?;
        let checksum = if raw.checksum.is_empty() {
            0
        } else {
            let digits = raw.checksum.strip_prefix("0x").unwrap_or(&raw.checksum);
            u32::from_str_radix(digits, 16)
                .map_err(|_| ChannelError::Manifest(format!("bad checksum {:?}", raw.checksum)))?
        };
        Ok(UpdateManifest {
            available: raw.available,
            firmware_version: raw.firmware_version,
            url: raw.url,
            size: raw.size,
            checksum,
        })
    }
}
