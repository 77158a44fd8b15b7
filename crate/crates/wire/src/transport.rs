//! Serving a [`Router`] over stdio or TCP.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::codec::Framing;
use crate::router::Router;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("BindFailure: {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
}

/// Answer framed requests in order until the reader ends.
pub fn serve_stream(
    router: &Router,
    mut reader: impl BufRead,
    mut writer: impl Write,
    framing: Framing,
) -> io::Result<()> {
    while let Some(body) = framing.read(&mut reader)? {
        let reply = router.handle(&body);
        framing.write(&mut writer, &reply)?;
    }
    Ok(())
}

/// Newline-delimited JSON on stdin/stdout.
pub fn serve_stdio(router: &Router) -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_stream(router, stdin.lock(), stdout.lock(), Framing::Lines)
}

/// A TCP server running on background threads, one per connection.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Block until the acceptor exits, which only happens after shutdown.
    pub fn wait(mut self) {
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(t) = self.acceptor.take() {
            self.stop.store(true, Ordering::SeqCst);
            // Wake the blocking accept so it can observe the flag.
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

/// Bind `addr` (port 0 picks a free port) and serve length-prefixed frames.
pub fn serve_tcp(router: Router, addr: &str) -> Result<ServerHandle, ServeError> {
    let listener = TcpListener::bind(addr).map_err(|source| ServeError::BindFailure {
        addr: addr.to_string(),
        source,
    })?;
    let local = listener
        .local_addr()
        .map_err(|source| ServeError::BindFailure {
            addr: addr.to_string(),
            source,
        })?;
    let router = Arc::new(router);
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let acceptor = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let _ = stream.set_nodelay(true);
            let router = Arc::clone(&router);
            std::thread::spawn(move || {
                let Ok(read_half) = stream.try_clone() else {
                    return;
                };
                let _ = serve_stream(
                    &router,
                    BufReader::new(read_half),
                    stream,
                    Framing::LengthPrefixed,
                );
            });
        }
    });
    Ok(ServerHandle {
        addr: local,
        stop,
        acceptor: Some(acceptor),
    })
}
