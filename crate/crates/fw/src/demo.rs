//! End-to-end attack demonstration over the loopback channel.
//!
//! [`run_attack_demo`] builds a deterministic world from a seed and
//! plays the standard story:
//!
//! 1. The vendor publishes firmware version 2 (or, with
//!    `fake_availability`, publishes nothing at all).
//! 2. An interceptor sits between the PCD and the vendor.  It crafts a
//!    modified update — payload patched, app version forced to
//!    `0xDEADBEEF` — and *resigns* it, recomputing every checksum so
//!    the file is internally consistent again.
//! 3. The PCD syncs: polls the manifest through the interceptor,
//!    downloads what it is offered, forwards it to the tracker.
//! 4. The tracker verifies and decides.
//!
//! Under the checksum-only policy the tracker installs the forgery and
//! `VERSION?` afterwards reports `0xDEADBEEF`.  With the MAC
//! countermeasure (`countermeasure_mac`) the same attack is rejected
//! — resigning recomputes checksums, but the attacker cannot produce
//! the keyed tag — and the installed versions do not move.

use afw::container::{parse_update, serialize_update};
use afw::mac::{attach_mac, MacKey};
use afw::patch::{patch_bytes, resign, set_version};
use afw::verify::{RejectCause, VerifyPolicy};
use afw::ImageRole;

use crate::channel::{interceptor, pcd, server, tracker, ChannelError};
use crate::channel::{Attack, EventLog, SyncOutcome, SyncReport, TrackerConfig, UpdateManifest};
use crate::fixture::gen_update_bytes;

/// App version the forged update announces.
pub const ATTACK_VERSION: u32 = 0xDEAD_BEEF;

/// Version the vendor's official update announces.
pub const OFFICIAL_VERSION: u32 = 2;

/// Version the tracker starts out with (both images).
pub const INSTALLED_VERSION: u32 = 1;

const APP_SIZE: usize = 4096;
const BOOT_SIZE: usize = 1024;

/// Key shared by vendor and tracker when the countermeasure is on.
/// A demo constant: key management is out of scope here.
pub fn demo_key() -> MacKey {
    MacKey::new(*b"demo tracker master mac key 0001")
}

#[derive(Clone, Debug)]
pub struct DemoOptions {
    /// Run the tracker with the checksum+MAC policy (and have the
    /// vendor tag its official release accordingly).
    pub countermeasure_mac: bool,
    /// Vendor publishes nothing; the interceptor fakes availability.
    pub fake_availability: bool,
    /// Seed for the deterministic firmware fixtures.
    pub seed: u64,
}

impl Default for DemoOptions {
    fn default() -> DemoOptions {
        DemoOptions { countermeasure_mac: false, fake_availability: false, seed: 1 }
    }
}

/// What the demo run produced.
#[derive(Clone, Debug)]
pub struct DemoReport {
    /// The tracker ended up running the forged app version.
    pub attack_installed: bool,
    /// The run matched the mode's expectation: install without the
    /// countermeasure, rejection with unchanged versions under it.
    pub outcome_as_expected: bool,
    pub sync: SyncReport,
    /// Ordered transcript of every node's events.
    pub lines: Vec<String>,
}

/// Forge the attack firmware from a captured official file: patch a
/// marker into the app payload, force the version, resign.
fn forge(official: &[u8], log: &EventLog) -> Vec<u8> {
    let update = parse_update(official).expect("official update parses");
    let update = patch_bytes(&update, ImageRole::App, 0, b"INJECTED PAYLOAD")
        .expect("app payload fits the marker");
    let update = set_version(&update, ImageRole::App, ATTACK_VERSION);
    let update = resign(&update);
    log.note(
        "attacker",
        format!("forged update: payload patched, app version 0x{ATTACK_VERSION:08x}"),
    );
    log.note("attacker", "resigned: all checksums recomputed, file self-consistent");
    serialize_update(&update).expect("forged update serializes")
}

/// Build the world, run one sync pass, and report.
pub fn run_attack_demo(options: &DemoOptions) -> Result<DemoReport, ChannelError> {
    let log = EventLog::new();

    // The vendor's official release.  Under the countermeasure the
    // vendor ships it with a MAC trailer so legitimate updates still
    // install.
    let official = gen_update_bytes(
        options.seed,
        APP_SIZE,
        BOOT_SIZE,
        OFFICIAL_VERSION,
        INSTALLED_VERSION,
    )
    .expect("fixture sizes are generous");
    let published = if options.countermeasure_mac {
        attach_mac(&official, &demo_key()).expect("official file carries no trailer yet")
    } else {
        official.clone()
    };

    let vendor = if options.fake_availability {
        log.note("server", "no update published");
        server::spawn(UpdateManifest::unavailable(), None, log.clone())?
    } else {
        log.note(
            "server",
            format!(
                "publishing official update 0x{OFFICIAL_VERSION:08x} ({} bytes)",
                published.len()
            ),
        );
        server::spawn(
            UpdateManifest::for_firmware(OFFICIAL_VERSION, &published),
            Some(published.clone()),
            log.clone(),
        )?
    };

    // The attacker works from the official file — captured in flight
    // when the vendor publishes it, or from a previously obtained copy
    // when faking availability.  Resigning needs no secrets either way.
    let source_note = if options.fake_availability {
        "working from a previously obtained official file"
    } else {
        "captured the official update in flight"
    };
    log.note("attacker", source_note);
    let forged = forge(&official, &log);

    let attack = if options.fake_availability {
        log.note("attacker", "fabricating update availability for the PCD");
        Attack::FakeAvailability {
            manifest: UpdateManifest::for_firmware(ATTACK_VERSION, &forged),
            firmware: forged,
        }
    } else {
        Attack::SwapFirmware { firmware: forged }
    };
    let intercept = interceptor::spawn(vendor.addr(), attack, log.clone())?;

    let policy = if options.countermeasure_mac {
        VerifyPolicy::ChecksumAndMac { key: demo_key() }
    } else {
        VerifyPolicy::ChecksumOnly
    };
    let device = tracker::spawn(
        TrackerConfig {
            app_version: INSTALLED_VERSION,
            boot_version: INSTALLED_VERSION,
            policy,
        },
        log.clone(),
    )?;

    // The PCD is configured with the interceptor as its endpoint —
    // the on-path position.
    let sync = pcd::sync(intercept.addr(), device.addr(), &log);

    device.shutdown();
    intercept.shutdown();
    vendor.shutdown();

    let attack_installed =
        matches!(sync.outcome, SyncOutcome::Installed { app, .. } if app == ATTACK_VERSION);
    let outcome_as_expected = if options.countermeasure_mac {
        let rejected_for_mac = matches!(
            sync.outcome,
            SyncOutcome::Rejected(Some(RejectCause::MacMissing | RejectCause::MacMismatch))
        );
        rejected_for_mac && sync.versions_after == sync.versions_before
    } else {
        attack_installed
    };

    Ok(DemoReport { attack_installed, outcome_as_expected, sync, lines: log.lines() })
}
