//! Minimal HTTP/1.1 endpoint exposing a [`ScoringService`] over the wire
//! protocol. One request per connection; any path accepts POST.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::protocol::{decode_request, encode_response, ErrorKind, Failed, Response, ScoringService, WireError};

const MAX_BODY: usize = 16 << 20;

/// A running server; dropping the handle does not stop it, call [`ServerHandle::stop`].
pub struct ServerHandle {
    pub addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}/score", self.addr)
    }

    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (use port 0 for an ephemeral port) and serves in the background.
pub fn spawn(addr: &str, service: Arc<dyn ScoringService>) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::spawn(move || serve(listener, service, &flag));
    Ok(ServerHandle {
        addr,
        stop,
        thread: Some(thread),
    })
}

/// Accept loop; returns once `stop` is set and a connection arrives.
pub fn serve(listener: TcpListener, service: Arc<dyn ScoringService>, stop: &AtomicBool) {
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = conn else { continue };
        let service = service.clone();
        thread::spawn(move || {
            let _ = handle_connection(stream, service.as_ref());
        });
    }
}

fn bad_request(msg: String) -> Response {
    Response::Failed(Failed {
        id: String::new(),
        error: WireError {
            kind: ErrorKind::BadRequest,
            msg,
        },
    })
}

fn handle_connection(stream: TcpStream, service: &dyn ScoringService) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = h.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let (status, body) = if !request_line.starts_with("POST ") {
        (405, encode_response(&bad_request("only POST is supported".into())))
    } else if content_length > MAX_BODY {
        (413, encode_response(&bad_request("request body too large".into())))
    } else {
        let mut buf = vec![0; content_length];
        reader.read_exact(&mut buf)?;
        let text = String::from_utf8_lossy(&buf);
        match decode_request(&text) {
            Ok(req) => (200, encode_response(&service.handle(&req))),
            Err(e) => (400, encode_response(&bad_request(format!("undecodable request: {e}")))),
        }
    };
    write_response(stream, status, &body)
}

fn write_response(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        405 => "Method Not Allowed",
        413 => "Payload Too Large",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
