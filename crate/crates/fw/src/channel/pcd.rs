//! The PCD node: the phone-app role that shuttles updates around.
//!
//! One [`sync`] pass does what the companion app does on a schedule:
//! ask the tracker what it runs, poll the configured endpoint for a
//! manifest, download the advertised firmware if it is newer, and
//! forward it to the tracker in chunks of at most [`MAX_CHUNK`] bytes.
//!
//! The PCD deliberately verifies nothing.  It does not check the
//! download against the manifest checksum, does not parse the
//! container, and trusts whatever endpoint it was pointed at — which
//! is exactly the trust model that makes the interceptor interesting.
//! All acceptance decisions come back from the tracker in the COMMIT
//! reply.

use std::io::Write;
use std::net::{SocketAddr, TcpStream};

use afw::verify::RejectCause;

use super::http;
use super::manifest::UpdateManifest;
use super::wire::{decode_cause, read_reply, write_frame, Frame, Reply, MAX_CHUNK};
use super::{EventLog, IO_TIMEOUT};

/// How a sync pass ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyncOutcome {
    /// No update offered, or the tracker already runs that version.
    UpToDate,
    /// The tracker accepted and installed the transferred firmware.
    Installed { app: u32, boot: u32 },
    /// The tracker refused the transferred firmware.
    Rejected(Option<RejectCause>),
    /// A node could not be reached or answered garbage.
    TransportError(String),
}

/// Everything observable about one sync pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncReport {
    /// The manifest as the PCD saw it (post-interception, if any).
    pub manifest: Option<UpdateManifest>,
    pub outcome: SyncOutcome,
    /// Firmware bytes forwarded to the tracker.
    pub bytes_sent: u64,
    pub chunks_sent: u64,
    /// Tracker-reported versions at the start and end of the pass.
    pub versions_before: Option<(u32, u32)>,
    pub versions_after: Option<(u32, u32)>,
}

/// Scratch state threaded through the fallible part of a sync.
#[derive(Default)]
struct Progress {
    manifest: Option<UpdateManifest>,
    bytes_sent: u64,
    chunks_sent: u64,
    versions_before: Option<(u32, u32)>,
    versions_after: Option<(u32, u32)>,
}

/// A live framed connection to the tracker.
struct TrackerLink {
    stream: TcpStream,
}

impl TrackerLink {
    fn connect(addr: SocketAddr) -> Result<TrackerLink, String> {
        let stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT)
            .map_err(|e| format!("tracker link: {e}"))?;
        stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(|e| format!("tracker link: {e}"))?;
        stream.set_write_timeout(Some(IO_TIMEOUT)).map_err(|e| format!("tracker link: {e}"))?;
        Ok(TrackerLink { stream })
    }

    fn send(&mut self, frame: &Frame) -> Result<(), String> {
        write_frame(&mut self.stream, frame)
            .and_then(|()| self.stream.flush())
            .map_err(|e| format!("tracker link: {e}"))
    }

    fn reply(&mut self) -> Result<Reply, String> {
        read_reply(&mut self.stream).map_err(|e| format!("tracker link: {e}"))
    }

    fn versions(&mut self) -> Result<(u32, u32), String> {
        self.send(&Frame::VersionQuery)?;
        match self.reply()? {
            Reply::Versions { app, boot } => Ok((app, boot)),
            other => Err(format!("tracker link: unexpected reply {other:?}")),
        }
    }
}

/// Run one sync pass against `endpoint` (the vendor, or whatever sits
/// in its place) on behalf of the tracker at `tracker`.
pub fn sync(endpoint: SocketAddr, tracker: SocketAddr, log: &EventLog) -> SyncReport {
    let mut progress = Progress::default();
    let outcome = run(endpoint, tracker, log, &mut progress).unwrap_or_else(|e| {
        log.note("pcd", format!("sync failed: {e}"));
        SyncOutcome::TransportError(e)
    });
    SyncReport {
        manifest: progress.manifest,
        outcome,
        bytes_sent: progress.bytes_sent,
        chunks_sent: progress.chunks_sent,
        versions_before: progress.versions_before,
        versions_after: progress.versions_after,
    }
}

fn fetch(endpoint: SocketAddr, path: &str, what: &str) -> Result<http::Response, String> {
    let response = http::get(endpoint, path).map_err(|e| format!("{what} fetch: {e}"))?;
    if response.status != 200 {
        return Err(format!("{what} fetch: HTTP {} {}", response.status, response.reason));
    }
    Ok(response)
}

fn run(
    endpoint: SocketAddr,
    tracker: SocketAddr,
    log: &EventLog,
    progress: &mut Progress,
) -> Result<SyncOutcome, String> {
    let mut link = TrackerLink::connect(tracker)?;
    let before = link.versions()?;
    progress.versions_before = Some(before);
    log.note("pcd", format!("tracker reports app=0x{:08x} boot=0x{:08x}", before.0, before.1));

    let response = fetch(endpoint, "/manifest", "manifest")?;
    let text = std::str::from_utf8(&response.body)
        .map_err(|_| "manifest fetch: body is not UTF-8".to_string())?;
    let manifest = UpdateManifest::from_json(text).map_err(|e| format!("manifest fetch: {e}"))?;
    progress.manifest = Some(manifest.clone());

    if !manifest.available {
        log.note("pcd", "endpoint reports no update available");
        progress.versions_after = Some(before);
        return Ok(SyncOutcome::UpToDate);
    }
    log.note(
        "pcd",
        format!(
            "update 0x{:08x} offered: {} bytes, checksum 0x{:08x}",
            manifest.firmware_version, manifest.size, manifest.checksum
        ),
    );
    if manifest.firmware_version <= before.0 {
        log.note("pcd", "tracker app firmware is current; skipping");
        progress.versions_after = Some(before);
        return Ok(SyncOutcome::UpToDate);
    }

    log.note("pcd", format!("downloading {}", manifest.url));
    let firmware = fetch(endpoint, &manifest.url, "firmware")?.body;
    if firmware.len() as u64 != manifest.size {
        // Noted but not acted on: the PCD is not the verifier.
        log.note(
            "pcd",
            format!("downloaded {} bytes though manifest said {}", firmware.len(), manifest.size),
        );
    }

    let total: u32 =
        firmware.len().try_into().map_err(|_| "firmware too large to transfer".to_string())?;
    link.send(&Frame::Begin(total))?;
    for part in firmware.chunks(MAX_CHUNK) {
        link.send(&Frame::Chunk(part.to_vec()))?;
        progress.chunks_sent += 1;
        progress.bytes_sent += part.len() as u64;
    }
    log.note(
        "pcd",
        format!(
            "forwarded {} bytes in {} chunks of at most {MAX_CHUNK}",
            progress.bytes_sent, progress.chunks_sent
        ),
    );
    link.send(&Frame::Commit)?;
    let reply = link.reply()?;
    let Reply::CommitReply { accepted, cause } = reply else {
        return Err(format!("tracker link: unexpected reply {reply:?}"));
    };
    let after = link.versions()?;
    progress.versions_after = Some(after);
    if accepted {
        log.note(
            "pcd",
            format!("tracker installed the update (app=0x{:08x} boot=0x{:08x})", after.0, after.1),
        );
        Ok(SyncOutcome::Installed { app: after.0, boot: after.1 })
    } else {
        let cause = decode_cause(cause);
        match cause {
            Some(c) => log.note("pcd", format!("tracker rejected the update: {c}")),
            None => log.note("pcd", "tracker rejected the update (unspecified cause)"),
        }
        Ok(SyncOutcome::Rejected(cause))
    }
}
