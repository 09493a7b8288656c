//! Loopback simulation of the tracker update channel.
//!
//! Four nodes, wired together over 127.0.0.1 TCP sockets only — no
//! shared memory, so an on-path attacker sees exactly what a network
//! attacker would see:
//!
//! ```text
//!  vendor server  <--HTTP-->  interceptor  <--HTTP-->  PCD  <--frames-->  tracker
//!  (manifest +                (passthrough             (fetches,          (receives,
//!   firmware)                  or attack)               no checks)         verifies)
//! ```
//!
//! The vendor serves an update manifest and a firmware file over plain
//! HTTP/1.1 (the real channel had no TLS, which is what makes the
//! interceptor position realistic).  The PCD is the phone app's role:
//! it polls the manifest, downloads the firmware and forwards it to
//! the tracker in 20-byte chunks — the classic BLE ATT payload size —
//! performing no verification of its own.  All verification happens on
//! the tracker, per [`afw::verify`].
//!
//! Every node handles one connection at a time, sequentially; there is
//! deliberately no concurrency to reason about beyond "each node is
//! its own thread".

pub mod http;
pub mod interceptor;
pub mod manifest;
pub mod pcd;
pub mod server;
pub mod tracker;
pub mod wire;

pub use interceptor::Attack;
pub use manifest::UpdateManifest;
pub use pcd::{SyncOutcome, SyncReport};
pub use tracker::TrackerConfig;

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// Socket timeout for every read/write in the simulator; a wedged
/// peer turns into an error instead of a hang.
pub const IO_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad manifest: {0}")]
    Manifest(String),
}

/// Shared, ordered transcript of node events, for demo output and
/// test assertions.
#[derive(Clone, Default)]
pub struct EventLog {
    entries: Arc<Mutex<Vec<String>>>,
}

impl EventLog {
    pub fn new() -> EventLog {
        EventLog::default()
    }

    pub fn note(&self, node: &str, message: impl AsRef<str>) {
        let mut entries = self.entries.lock().expect("log lock");
        entries.push(format!("[{node:<9}] {}", message.as_ref()));
    }

    pub fn lines(&self) -> Vec<String> {
        self.entries.lock().expect("log lock").clone()
    }
}

/// A running node: its bound address plus the means to stop it.
pub struct NodeHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    live: Arc<Mutex<Option<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl NodeHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting, cut the connection being served (if any), wake
    /// the accept loop, and join the thread.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        if let Some(thread) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Unblock a handler mid-read so shutdown is prompt even if
            // a client left its connection dangling.
            if let Some(conn) = self.live.lock().expect("live lock").as_ref() {
                let _ = conn.shutdown(std::net::Shutdown::Both);
            }
            // Wake the blocking accept with a throwaway connection.
            let _ = TcpStream::connect_timeout(&self.addr, IO_TIMEOUT);
            let _ = thread.join();
        }
    }
}

impl Drop for NodeHandle {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

/// Bind a loopback listener and run `handler` for each accepted
/// connection, one at a time, until shut down.
pub(crate) fn spawn_node(
    mut handler: impl FnMut(TcpStream) + Send + 'static,
) -> io::Result<NodeHandle> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let live: Arc<Mutex<Option<TcpStream>>> = Arc::default();
    let live_in = Arc::clone(&live);
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { break };
            let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
            let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
            *live_in.lock().expect("live lock") = stream.try_clone().ok();
            handler(stream);
            *live_in.lock().expect("live lock") = None;
        }
    });
    Ok(NodeHandle { addr, stop, live, thread: Some(thread) })
}
