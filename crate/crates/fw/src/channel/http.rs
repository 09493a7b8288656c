//! Just enough HTTP/1.1 for the update channel: GET requests,
//! `Content-Length`-framed responses, one request per connection.
//!
//! The real transport is ordinary unauthenticated HTTP, so the
//! simulator speaks it straight off a `TcpStream` rather than pulling
//! in a server stack; the entire protocol surface here is two GET
//! endpoints.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpStream};

use super::IO_TIMEOUT;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub reason: String,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Response {
    pub fn ok(content_type: &str, body: Vec<u8>) -> Response {
        Response { status: 200, reason: "OK".into(), content_type: content_type.into(), body }
    }

    pub fn not_found() -> Response {
        Response {
            status: 404,
            reason: "Not Found".into(),
            content_type: "text/plain".into(),
            body: b"not found".to_vec(),
        }
    }

    pub fn bad_gateway(detail: &str) -> Response {
        Response {
            status: 502,
            reason: "Bad Gateway".into(),
            content_type: "text/plain".into(),
            body: detail.as_bytes().to_vec(),
        }
    }
}

fn invalid(what: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, what.to_string())
}

/// Read one request head (the simulator's requests have no body).
pub fn read_request(reader: &mut BufReader<TcpStream>) -> io::Result<Request> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().ok_or_else(|| invalid("empty request line"))?.to_string();
    let path = parts.next().ok_or_else(|| invalid("request line without path"))?.to_string();
    // Drain headers.
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 || header.trim_end().is_empty() {
            break;
        }
    }
    Ok(Request { method, path })
}

pub fn write_response(stream: &mut TcpStream, response: &Response) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {} {}\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        response.status,
        response.reason,
        response.content_type,
        response.body.len()
    )?;
    stream.write_all(&response.body)?;
    stream.flush()
}

fn read_response(stream: TcpStream) -> io::Result<Response> {
    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader.read_line(&mut status_line)?;
    let mut parts = status_line.split_whitespace();
    let _version = parts.next().ok_or_else(|| invalid("empty status line"))?;
    let status: u16 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| invalid("unparsable status code"))?;
    let reason = parts.collect::<Vec<_>>().join(" ");

    let mut content_length: Option<usize> = None;
    let mut content_type = String::new();
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 || header.trim_end().is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            let value = value.trim();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => {
                    content_length =
                        Some(value.parse().map_err(|_| invalid("bad content-length"))?)
                }
                "content-type" => content_type = value.to_string(),
                _ => {}
            }
        }
    }
    let length = content_length.ok_or_else(|| invalid("response without content-length"))?;
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    Ok(Response { status, reason, content_type, body })
}

/// Blocking GET against a loopback endpoint.
pub fn get(addr: SocketAddr, path: &str) -> io::Result<Response> {
    let mut stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT)?;
    stream.set_read_timeout(Some(IO_TIMEOUT))?;
    stream.set_write_timeout(Some(IO_TIMEOUT))?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n")?;
    stream.flush()?;
    read_response(stream)
}
