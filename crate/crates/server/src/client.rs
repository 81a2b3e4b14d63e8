//! Blocking clients for both transports.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use thiserror::Error;

use crate::protocol::{Request, Response};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("http: {0}")]
    Http(String),
}

/// A persistent connection speaking length-prefixed JSON frames.
pub struct FramedClient {
    stream: TcpStream,
}

impl FramedClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(FramedClient { stream })
    }

    /// Send one frame and wait for the reply frame.
    pub fn send_raw(&mut self, payload: &[u8]) -> io::Result<Vec<u8>> {
        let len = u32::try_from(payload.len()).map_err(io::Error::other)?;
        self.stream.write_all(&len.to_be_bytes())?;
        self.stream.write_all(payload)?;
        self.stream.flush()?;
        let mut head = [0u8; 4];
        self.stream.read_exact(&mut head)?;
        let mut body = vec![0; u32::from_be_bytes(head) as usize];
        self.stream.read_exact(&mut body)?;
        Ok(body)
    }

    pub fn request(&mut self, req: &Request) -> Result<Response, ClientError> {
        let reply = self.send_raw(&serde_json::to_vec(req)?)?;
        Ok(serde_json::from_slice(&reply)?)
    }
}

/// One HTTP call: POST `body` to `/api` and return the JSON reply.
pub fn http_call(
    addr: impl ToSocketAddrs,
    body: &serde_json::Value,
) -> Result<serde_json::Value, ClientError> {
    let (status, bytes) = http_raw(addr, "POST", "/api", &serde_json::to_vec(body)?)?;
    if status != 200 {
        return Err(ClientError::Http(format!("status {status}")));
    }
    Ok(serde_json::from_slice(&bytes)?)
}

/// Minimal HTTP/1.1 exchange on a fresh connection; returns status and body.
pub fn http_raw(
    addr: impl ToSocketAddrs,
    method: &str,
    path: &str,
    body: &[u8],
) -> Result<(u16, Vec<u8>), ClientError> {
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw)?;
    let split = raw
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .ok_or_else(|| ClientError::Http("no header terminator".into()))?;
    let head = String::from_utf8_lossy(&raw[..split]);
    let status = head
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ClientError::Http(format!("bad status line in {head:?}")))?;
    Ok((status, raw[split + 4..].to_vec()))
}
