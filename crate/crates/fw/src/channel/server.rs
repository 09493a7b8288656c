//! The vendor's update server: `GET /manifest`, `GET /firmware`.

use std::io::BufReader;

use super::http::{read_request, write_response, Response};
use super::manifest::UpdateManifest;
use super::{spawn_node, ChannelError, EventLog, NodeHandle};

/// Start a vendor server for one manifest and (if available) one
/// firmware file.
///
/// The manifest must be consistent with the file it advertises:
/// matching size and checksum, firmware present exactly when
/// `available`.  The real server is authoritative for this; keeping
/// the invariant here means any inconsistency seen downstream was
/// introduced on the path.
pub fn spawn(
    manifest: UpdateManifest,
    firmware: Option<Vec<u8>>,
    log: EventLog,
) -> Result<NodeHandle, ChannelError> {
    match (&manifest.available, &firmware) {
        (true, Some(fw)) => {
            if manifest.size != fw.len() as u64 {
                return Err(ChannelError::Manifest(format!(
                    "manifest size {} != firmware size {}",
                    manifest.size,
                    fw.len()
                )));
            }
            let actual = afw::crc32::crc32(fw);
            if manifest.checksum != actual {
                return Err(ChannelError::Manifest(format!(
                    "manifest checksum 0x{:08x} != firmware checksum 0x{actual:08x}",
                    manifest.checksum
                )));
            }
            if manifest.url.is_empty() {
                return Err(ChannelError::Manifest("available manifest without url".into()));
            }
        }
        (false, None) => {}
        (true, None) => {
            return Err(ChannelError::Manifest("available manifest without firmware".into()))
        }
        (false, Some(_)) => {
            return Err(ChannelError::Manifest("firmware without available manifest".into()))
        }
    }

    let handle = spawn_node(move |stream| {
        let mut reader = BufReader::new(match stream.try_clone() {
            Ok(s) => s,
            Err(_) => return,
        });
        let Ok(request) = read_request(&mut reader) else { return };
        let mut stream = stream;
        let response = match (request.method.as_str(), request.path.as_str()) {
            ("GET", "/manifest") => {
                log.note("server", "serving manifest");
                Response::ok("application/json", manifest.to_json().into_bytes())
            }
            ("GET", "/firmware") => match &firmware {
                Some(fw) => {
                    log.note("server", format!("serving firmware ({} bytes)", fw.len()));
                    Response::ok("application/octet-stream", fw.clone())
                }
                None => {
                    log.note("server", "firmware requested but none published");
                    Response::not_found()
                }
            },
            _ => {
                log.note("server", format!("{} {} -> 404", request.method, request.path));
                Response::not_found()
            }
        };
        let _ = write_response(&mut stream, &response);
    })?;
    Ok(handle)
}
