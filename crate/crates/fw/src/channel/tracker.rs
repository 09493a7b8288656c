//! The tracker node: receives an update over the framed protocol,
//! verifies on COMMIT, installs on acceptance.
//!
//! Per-session state machine:
//!
//! ```text
//!         BEGIN            CHUNK*            COMMIT
//! Idle ----------> Receiving ----> Receiving ------> Validating
//!                      ^  \                              |
//!                      |   \ BEGIN (abort + restart)     +-- accept -> Installed
//!                      +---/                             +-- reject -> Rejected
//! ```
//!
//! * BEGIN while receiving aborts the in-flight transfer and starts
//!   over (so a retried transfer needs no reconnect).
//! * Protocol violations — CHUNK without BEGIN, a chunk above the
//!   20-byte ceiling, data beyond the announced total, COMMIT without
//!   BEGIN, an unknown opcode, or an absurd BEGIN size — drop the
//!   connection and discard any in-flight transfer.  Installed
//!   versions never change on a violation.
//! * VERSION? is answered at any time, mid-transfer included.
//! * Installed versions change only when [`afw::verify`] accepts; the
//!   tracker trusts its policy and nothing else on this link.

use std::io::Write;
use std::net::TcpStream;

use afw::verify::{verify, VerificationReport, VerifyPolicy};

use super::wire::{encode_cause, read_frame, write_reply, Frame, Reply, MAX_CHUNK};
use super::{spawn_node, EventLog, NodeHandle};

/// Ceiling on an announced transfer size; models the device's staging
/// area.  A BEGIN above this is a protocol violation.
pub const MAX_TOTAL_SIZE: u32 = 32 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct TrackerConfig {
    pub app_version: u32,
    pub boot_version: u32,
    pub policy: VerifyPolicy,
}

struct Staging {
    total: u32,
    buf: Vec<u8>,
}

struct Tracker {
    app_version: u32,
    boot_version: u32,
    policy: VerifyPolicy,
    log: EventLog,
}

enum SessionEnd {
    Eof,
    Violation(String),
    IoError,
}

impl Tracker {
    fn handle_connection(&mut self, mut stream: TcpStream) {
        // In-flight transfer state lives and dies with the connection.
        let mut staging: Option<Staging> = None;
        let end = self.session(&mut stream, &mut staging);
        if let SessionEnd::Violation(what) = end {
            self.log.note("tracker", format!("protocol violation: {what}; dropping connection"));
        }
    }

    fn session(&mut self, stream: &mut TcpStream, staging: &mut Option<Staging>) -> SessionEnd {
        loop {
            let frame = match read_frame(stream) {
                Ok(Some(frame)) => frame,
                Ok(None) => return SessionEnd::Eof,
                Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                    return SessionEnd::Violation(e.to_string())
                }
                Err(_) => return SessionEnd::IoError,
            };
            match frame {
                Frame::Begin(total) => {
                    if total > MAX_TOTAL_SIZE {
                        return SessionEnd::Violation(format!("announced size {total} too large"));
                    }
                    if staging.is_some() {
                        self.log.note("tracker", "new BEGIN aborts in-flight transfer");
                    }
                    self.log.note("tracker", format!("receiving update ({total} bytes announced)"));
                    *staging = Some(Staging { total, buf: Vec::with_capacity(total as usize) });
                }
                Frame::Chunk(data) => {
                    let Some(st) = staging.as_mut() else {
                        return SessionEnd::Violation("CHUNK without BEGIN".into());
                    };
                    if data.len() > MAX_CHUNK {
                        return SessionEnd::Violation(format!("chunk of {} bytes", data.len()));
                    }
                    if st.buf.len() as u64 + data.len() as u64 > st.total as u64 {
                        return SessionEnd::Violation("data beyond announced size".into());
                    }
                    st.buf.extend_from_slice(&data);
                }
                Frame::Commit => {
                    let Some(st) = staging.take() else {
                        return SessionEnd::Violation("COMMIT without BEGIN".into());
                    };
                    self.log.note(
                        "tracker",
                        format!("validating {} of {} received bytes", st.buf.len(), st.total),
                    );
                    let reply = self.commit(&st.buf);
                    if write_reply(stream, &reply).and_then(|()| stream.flush()).is_err() {
                        return SessionEnd::IoError;
                    }
                }
                Frame::VersionQuery => {
                    let reply = Reply::Versions { app: self.app_version, boot: self.boot_version };
                    if write_reply(stream, &reply).and_then(|()| stream.flush()).is_err() {
                        return SessionEnd::IoError;
                    }
                }
            }
        }
    }

    fn commit(&mut self, bytes: &[u8]) -> Reply {
        match verify(bytes, &self.policy) {
            VerificationReport::Accept { app_version, boot_version } => {
                self.app_version = app_version;
                self.boot_version = boot_version;
                self.log.note(
                    "tracker",
                    format!("ACCEPT: installed app=0x{app_version:08x} boot=0x{boot_version:08x}"),
                );
                Reply::CommitReply { accepted: true, cause: 0 }
            }
            VerificationReport::Reject(cause) => {
                self.log.note("tracker", format!("REJECT: {cause}"));
                Reply::CommitReply { accepted: false, cause: encode_cause(Some(cause)) }
            }
        }
    }
}

/// Start a tracker node.  Installed versions persist across
/// connections for the lifetime of the node.
pub fn spawn(config: TrackerConfig, log: EventLog) -> std::io::Result<NodeHandle> {
    let policy_name = match &config.policy {
        VerifyPolicy::ChecksumOnly => "checksum-only",
        VerifyPolicy::ChecksumAndMac { .. } => "checksum+mac",
    };
    log.note(
        "tracker",
        format!(
            "up with app=0x{:08x} boot=0x{:08x}, policy {policy_name}",
            config.app_version, config.boot_version
        ),
    );
    let mut tracker = Tracker {
        app_version: config.app_version,
        boot_version: config.boot_version,
        policy: config.policy,
        log,
    };
    spawn_node(move |stream| tracker.handle_connection(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::wire::{read_reply, write_frame};
    use afw::container::{build_update, serialize_update};
    use std::net::TcpStream;

    fn connect(node: &NodeHandle) -> TcpStream {
        TcpStream::connect(node.addr()).unwrap()
    }

    fn send(stream: &mut TcpStream, frame: &Frame) {
        write_frame(stream, frame).unwrap();
        stream.flush().unwrap();
    }

    fn versions(stream: &mut TcpStream) -> (u32, u32) {
        send(stream, &Frame::VersionQuery);
        match read_reply(stream).unwrap() {
            Reply::Versions { app, boot } => (app, boot),
            other => panic!("unexpected reply {other:?}"),
        }
    }

    fn checksum_only(app: u32, boot: u32) -> TrackerConfig {
        TrackerConfig { app_version: app, boot_version: boot, policy: VerifyPolicy::ChecksumOnly }
    }

    fn upload(stream: &mut TcpStream, bytes: &[u8], chunk: usize) -> Reply {
        send(stream, &Frame::Begin(bytes.len() as u32));
        for part in bytes.chunks(chunk.max(1)) {
            send(stream, &Frame::Chunk(part.to_vec()));
        }
        send(stream, &Frame::Commit);
        read_reply(stream).unwrap()
    }

    #[test]
    fn install_flow_updates_versions() {
        let node = spawn(checksum_only(1, 1), EventLog::new()).unwrap();
        let mut s = connect(&node);
        assert_eq!(versions(&mut s), (1, 1));
        let bytes =
            serialize_update(&build_update(&[9u8; 100], &[7u8; 40], 5, 6).unwrap()).unwrap();
        let reply = upload(&mut s, &bytes, 20);
        assert_eq!(reply, Reply::CommitReply { accepted: true, cause: 0 });
        assert_eq!(versions(&mut s), (5, 6));
        drop(s);
        // State persists across connections.
        let mut s2 = connect(&node);
        assert_eq!(versions(&mut s2), (5, 6));
        node.shutdown();
    }

    #[test]
    fn chunking_transparency() {
        // Any chunking up to the ceiling produces the same verdict.
        let bytes =
            serialize_update(&build_update(&[3u8; 257], &[1u8; 19], 9, 9).unwrap()).unwrap();
        for chunk in [1usize, 2, 7, 19, 20] {
            let node = spawn(checksum_only(0, 0), EventLog::new()).unwrap();
            let mut s = connect(&node);
            assert_eq!(upload(&mut s, &bytes, chunk), Reply::CommitReply { accepted: true, cause: 0 });
            assert_eq!(versions(&mut s), (9, 9));
            node.shutdown();
        }
    }

    #[test]
    fn corrupted_upload_rejected_with_cause() {
        let node = spawn(checksum_only(1, 1), EventLog::new()).unwrap();
        let mut s = connect(&node);
        let mut bytes =
            serialize_update(&build_update(&[9u8; 64], &[7u8; 16], 5, 6).unwrap()).unwrap();
        bytes[50] ^= 0xFF;
        let reply = upload(&mut s, &bytes, 20);
        assert_eq!(reply, Reply::CommitReply { accepted: false, cause: 4 }); // app image mismatch
        assert_eq!(versions(&mut s), (1, 1));
        node.shutdown();
    }

    #[test]
    fn chunk_without_begin_drops_connection() {
        let node = spawn(checksum_only(2, 3), EventLog::new()).unwrap();
        let mut s = connect(&node);
        send(&mut s, &Frame::Chunk(vec![1, 2, 3]));
        // Connection is dropped: reading a reply fails.
        assert!(read_reply(&mut s).is_err());
        // State unchanged.
        let mut s2 = connect(&node);
        assert_eq!(versions(&mut s2), (2, 3));
        node.shutdown();
    }

    #[test]
    fn oversized_chunk_is_violation() {
        let node = spawn(checksum_only(2, 3), EventLog::new()).unwrap();
        let mut s = connect(&node);
        send(&mut s, &Frame::Begin(100));
        send(&mut s, &Frame::Chunk(vec![0; 21]));
        assert!(read_reply(&mut s).is_err());
        let mut s2 = connect(&node);
        assert_eq!(versions(&mut s2), (2, 3));
        node.shutdown();
    }

    #[test]
    fn overflow_beyond_announced_size_is_violation() {
        let node = spawn(checksum_only(0, 0), EventLog::new()).unwrap();
        let mut s = connect(&node);
        send(&mut s, &Frame::Begin(5));
        send(&mut s, &Frame::Chunk(vec![0; 4]));
        send(&mut s, &Frame::Chunk(vec![0; 4]));
        assert!(read_reply(&mut s).is_err());
        node.shutdown();
    }

    #[test]
    fn absurd_begin_size_is_violation() {
        let node = spawn(checksum_only(0, 0), EventLog::new()).unwrap();
        let mut s = connect(&node);
        send(&mut s, &Frame::Begin(u32::MAX));
        assert!(read_reply(&mut s).is_err());
        node.shutdown();
    }

    #[test]
    fn new_begin_aborts_in_flight_transfer() {
        let node = spawn(checksum_only(0, 0), EventLog::new()).unwrap();
        let mut s = connect(&node);
        let bytes = serialize_update(&build_update(&[5u8; 30], &[], 8, 8).unwrap()).unwrap();
        // Start a transfer, push some garbage, then restart cleanly.
        send(&mut s, &Frame::Begin(bytes.len() as u32));
        send(&mut s, &Frame::Chunk(vec![0xFF; 10]));
        let reply = upload(&mut s, &bytes, 20);
        assert_eq!(reply, Reply::CommitReply { accepted: true, cause: 0 });
        assert_eq!(versions(&mut s), (8, 8));
        node.shutdown();
    }

    #[test]
    fn commit_of_incomplete_transfer_rejects() {
        let node = spawn(checksum_only(4, 4), EventLog::new()).unwrap();
        let mut s = connect(&node);
        send(&mut s, &Frame::Begin(1000));
        send(&mut s, &Frame::Chunk(vec![1, 2, 3]));
        send(&mut s, &Frame::Commit);
        // 3 bytes are not a container: structural reject, not a hang.
        assert_eq!(read_reply(&mut s).unwrap(), Reply::CommitReply { accepted: false, cause: 6 });
        assert_eq!(versions(&mut s), (4, 4));
        node.shutdown();
    }
}
