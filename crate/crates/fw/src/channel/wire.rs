//! Framed PCD-to-tracker transfer protocol.
//!
//! A minimal stand-in for the real radio link, kept byte-exact simple:
//! opcode-tagged frames over TCP, every integer little-endian.
//!
//! ```text
//! requests                              replies
//! 0x01 BEGIN    u32 total_size
//! 0x02 CHUNK    u8 len, payload[len]
//! 0x03 COMMIT                           0x83 u8 verdict, u8 cause
//! 0x04 VERSION?                         0x84 u32 app, u32 boot
//! ```
//!
//! CHUNK carries its own length byte; the tracker enforces the 20-byte
//! ceiling ([`MAX_CHUNK`]), the wire format itself allows up to 255 so
//! that oversized chunks can be expressed — and rejected.  Verdict 1
//! means installed, 0 rejected; cause is the [`RejectCause`] encoding
//! below, 0 for none.

use std::io::{self, Read, Write};

use afw::verify::RejectCause;
use afw::ImageRole;

pub const OP_BEGIN: u8 = 0x01;
pub const OP_CHUNK: u8 = 0x02;
pub const OP_COMMIT: u8 = 0x03;
pub const OP_VERSION: u8 = 0x04;
pub const OP_COMMIT_REPLY: u8 = 0x83;
pub const OP_VERSIONS: u8 = 0x84;

/// Largest chunk a tracker accepts: the default usable ATT payload of
/// the radio link this models.
pub const MAX_CHUNK: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Begin(u32),
    Chunk(Vec<u8>),
    Commit,
    VersionQuery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reply {
    CommitReply { accepted: bool, cause: u8 },
    Versions { app: u32, boot: u32 },
}

fn bad(what: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, what)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Read one request frame; `Ok(None)` on clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Frame>> {
    let mut op = [0u8; 1];
    match r.read_exact(&mut op) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    match op[0] {
        OP_BEGIN => Ok(Some(Frame::Begin(read_u32(r)?))),
        OP_CHUNK => {
            let mut len = [0u8; 1];
            r.read_exact(&mut len)?;
            let mut payload = vec![0u8; len[0] as usize];
            r.read_exact(&mut payload)?;
            Ok(Some(Frame::Chunk(payload)))
        }
        OP_COMMIT => Ok(Some(Frame::Commit)),
        OP_VERSION => Ok(Some(Frame::VersionQuery)),
        other => Err(bad(format!("unknown opcode 0x{other:02x}"))),
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    match frame {
        Frame::Begin(total) => {
            w.write_all(&[OP_BEGIN])?;
            w.write_all(&total.to_le_bytes())
        }
        Frame::Chunk(payload) => {
            let len: u8 = payload
                .len()
                .try_into()
                .map_err(|_| bad(format!("chunk of {} bytes unencodable", payload.len())))?;
            w.write_all(&[OP_CHUNK, len])?;
            w.write_all(payload)
        }
        Frame::Commit => w.write_all(&[OP_COMMIT]),
        Frame::VersionQuery => w.write_all(&[OP_VERSION]),
    }
}

pub fn read_reply(r: &mut impl Read) -> io::Result<Reply> {
    let mut op = [0u8; 1];
    r.read_exact(&mut op)?;
    match op[0] {
        OP_COMMIT_REPLY => {
            let mut b = [0u8; 2];
            r.read_exact(&mut b)?;
            Ok(Reply::CommitReply { accepted: b[0] == 1, cause: b[1] })
        }
        OP_VERSIONS => Ok(Reply::Versions { app: read_u32(r)?, boot: read_u32(r)? }),
        other => Err(bad(format!("unknown reply opcode 0x{other:02x}"))),
    }
}

pub fn write_reply(w: &mut impl Write, reply: &Reply) -> io::Result<()> {
    match reply {
        Reply::CommitReply { accepted, cause } => {
            w.write_all(&[OP_COMMIT_REPLY, u8::from(*accepted), *cause])
        }
        Reply::Versions { app, boot } => {
            w.write_all(&[OP_VERSIONS])?;
            w.write_all(&app.to_le_bytes())?;
            w.write_all(&boot.to_le_bytes())
        }
    }
}

/// Cause byte for a COMMIT reply; 0 encodes "none".
pub fn encode_cause(cause: Option<RejectCause>) -> u8 {
    match cause {
        None => 0,
        Some(RejectCause::BadTableVersion) => 1,
        Some(RejectCause::BadTableLength) => 2,
        Some(RejectCause::TableChecksumMismatch) => 3,
        Some(RejectCause::ImageChecksumMismatch(ImageRole::App)) => 4,
        Some(RejectCause::ImageChecksumMismatch(ImageRole::Boot)) => 5,
        Some(RejectCause::BoundsError) => 6,
        Some(RejectCause::MacMissing) => 7,
        Some(RejectCause::MacMismatch) => 8,
    }
}

pub fn decode_cause(byte: u8) -> Option<RejectCause> {
    match byte {
        1 => Some(RejectCause::BadTableVersion),
        2 => Some(RejectCause::BadTableLength),
        3 => Some(RejectCause::TableChecksumMismatch),
        4 => Some(RejectCause::ImageChecksumMismatch(ImageRole::App)),
        5 => Some(RejectCause::ImageChecksumMismatch(ImageRole::Boot)),
        6 => Some(RejectCause::BoundsError),
        7 => Some(RejectCause::MacMissing),
        8 => Some(RejectCause::MacMismatch),
        _ => None,
    }
}
