//! Core library for the AFW1 firmware container format.
//!
//! AFW1 is a two-image update container as consumed by a small ARM
//! (Cortex-M0 class) activity tracker: an application image and a
//! bootloader image, described by a fixed-size header table and
//! "signed" with CRC-32 checksums.  Everything in the format is
//! little-endian.
//!
//! ```text
//! offset  size  field
//!      0     2  table_ver          (= 1)
//!      2     2  table_len          (= 44, header minus this checksum)
//!      4    20  images[0]          app image entry
//!     24    20  images[1]          bootloader image entry
//!     44     4  table_checksum     CRC-32 over bytes [0, 44)
//!     48   ...  payloads           app first, bootloader after
//! ```
//!
//! The point of the library is that CRC-32 is not a signature: the
//! [`patch`] module can modify a container and re-derive every checksum
//! ("resigning"), and any verifier that checks only checksums will
//! accept the result.  The [`mac`] module provides the keyed-MAC
//! trailer that closes that hole.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std`
//! feature only adds `std::error::Error` impls for the error types.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baseaddr;
pub mod container;
pub mod crc32;
pub mod mac;
pub mod patch;
pub mod verify;

pub use container::{
    build_update, parse_update, serialize_update, FirmwareUpdate, ImageEntry, ImageRole,
    UpdateHeader,
};
pub use crc32::{crc32, Crc32};
pub use mac::{attach_mac, verify_mac, MacKey, MacStatus};
pub use verify::{verify, RejectCause, VerificationReport, VerifyPolicy};
