//! Transports. One port carries both: a connection whose first byte is an
//! ASCII letter speaks HTTP (one request per call), anything else speaks
//! length-prefixed frames (4-byte big-endian length, then JSON) and owns a
//! single session for its lifetime.

use std::collections::HashMap;
use std::convert::Infallible;
use std::io;
use std::net::SocketAddr;
use std::path::{Component, Path};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use bytes::Bytes;
use http_body_util::{BodyExt, Full, Limited};
use hyper::body::Incoming;
use hyper::header::{HeaderValue, CONTENT_TYPE};
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper::{Method, StatusCode};
use hyper_util::rt::TokioIo;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;

use crate::protocol::{ErrorCode, Response};
use crate::service::{Service, Session};

/// Largest accepted request, on either transport.
pub const MAX_FRAME: usize = 16 << 20;

/// Service plus the sessions addressed by handle in HTTP mode.
pub struct Shared {
    pub service: Arc<Service>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

impl Shared {
    pub fn new(service: Arc<Service>) -> Self {
        Shared {
            service,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    /// One-request-per-call: the session is named by the request's
    /// `session` field. A reset without a known session opens a new one.
    pub fn call(&self, body: &[u8]) -> Response {
        let value: serde_json::Value = match serde_json::from_slice(body) {
            Ok(v) => v,
            Err(e) => {
                return Response::error(ErrorCode::BadRequest, format!("malformed JSON: {e}"))
            }
        };
        let named = value
            .get("session")
            .and_then(|s| s.as_str())
            .map(str::to_string);
        let is_reset = value.get("type").and_then(|t| t.as_str()) == Some("reset");
        let existing = named.as_ref().and_then(|id| {
            self.sessions
                .lock()
                .expect("sessions lock")
                .get(id)
                .cloned()
        });
        let (id, session) = match existing {
            Some(s) => (named.expect("named session"), s),
            None if is_reset => {
                let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
                let s = Arc::new(Mutex::new(Session::default()));
                self.sessions
                    .lock()
                    .expect("sessions lock")
                    .insert(id.clone(), s.clone());
                (id, s)
            }
            None if named.is_some() => {
                return Response::error(
                    ErrorCode::NoEpisode,
                    format!("unknown session {:?}", named.unwrap()),
                );
            }
            None => {
                // stateless requests (get_replay) and steps without a session
                let mut scratch = Session::default();
                return self.service.handle_bytes(&mut scratch, body);
            }
        };
        let mut resp = {
            let mut guard = session.lock().expect("session lock");
            self.service.handle_bytes(&mut guard, body)
        };
        match &mut resp {
            Response::State(s) => s.session = Some(id),
            Response::Result(r) => {
                r.session = Some(id.clone());
                r.state.session = Some(id);
            }
            _ => {}
        }
        resp
    }
}

pub async fn serve(listener: TcpListener, shared: Arc<Shared>) -> io::Result<()> {
    loop {
        let (stream, _) = listener.accept().await?;
        let shared = shared.clone();
        tokio::spawn(async move {
            let _ = handle_connection(stream, shared).await;
        });
    }
}

async fn handle_connection(stream: TcpStream, shared: Arc<Shared>) -> io::Result<()> {
    let mut first = [0u8; 1];
    if stream.peek(&mut first).await? == 0 {
        return Ok(());
    }
    if first[0].is_ascii_alphabetic() {
        serve_http(stream, shared).await
    } else {
        serve_frames(stream, shared).await
    }
}

async fn write_frame(stream: &mut TcpStream, resp: &Response) -> io::Result<()> {
    let body = serde_json::to_vec(resp).map_err(io::Error::other)?;
    stream.write_u32(body.len() as u32).await?;
    stream.write_all(&body).await?;
    stream.flush().await
}

async fn serve_frames(mut stream: TcpStream, shared: Arc<Shared>) -> io::Result<()> {
    let mut session = Session::default();
    loop {
        let len = match stream.read_u32().await {
            Ok(n) => n as usize,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let resp = if len > MAX_FRAME {
            // skip the payload so the next frame header lines up
            let mut rest = (&mut stream).take(len as u64);
            tokio::io::copy(&mut rest, &mut tokio::io::sink()).await?;
            Response::error(
                ErrorCode::BadRequest,
                format!("frame of {len} bytes exceeds {MAX_FRAME}"),
            )
        } else {
            let mut buf = vec![0; len];
            stream.read_exact(&mut buf).await?;
            shared.service.handle_bytes(&mut session, &buf)
        };
        write_frame(&mut stream, &resp).await?;
    }
}

type HttpResponse = hyper::Response<Full<Bytes>>;

fn reply(status: StatusCode, content_type: &'static str, body: impl Into<Bytes>) -> HttpResponse {
    let mut r = hyper::Response::new(Full::new(body.into()));
    *r.status_mut() = status;
    r.headers_mut()
        .insert(CONTENT_TYPE, HeaderValue::from_static(content_type));
    r
}

fn json_reply(resp: &Response) -> HttpResponse {
    let body = serde_json::to_vec(resp).expect("responses serialize");
    reply(StatusCode::OK, "application/json", body)
}

async fn serve_http(stream: TcpStream, shared: Arc<Shared>) -> io::Result<()> {
    let svc = service_fn(move |req| {
        let shared = shared.clone();
        async move { Ok::<_, Infallible>(route(req, &shared).await) }
    });
    http1::Builder::new()
        .serve_connection(TokioIo::new(stream), svc)
        .await
        .map_err(io::Error::other)
}

async fn route(req: hyper::Request<Incoming>, shared: &Shared) -> HttpResponse {
    match (req.method(), req.uri().path()) {
        (&Method::POST, "/api") => match Limited::new(req.into_body(), MAX_FRAME).collect().await {
            Ok(body) => json_reply(&shared.call(&body.to_bytes())),
            Err(e) => json_reply(&Response::error(ErrorCode::BadRequest, e.to_string())),
        },
        (&Method::GET | &Method::HEAD, path) => {
            static_file(shared.service.options().static_dir.as_deref(), path)
        }
        _ => reply(
            StatusCode::METHOD_NOT_ALLOWED,
            "text/plain",
            "method not allowed\n",
        ),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("wasm") => "application/wasm",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

fn static_file(root: Option<&Path>, url_path: &str) -> HttpResponse {
    let not_found = || reply(StatusCode::NOT_FOUND, "text/plain", "not found\n");
    let Some(root) = root else {
        return not_found();
    };
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return not_found();
    }
    let mut path = root.join(rel);
    if path.is_dir() {
        path = path.join("index.html");
    }
    match std::fs::read(&path) {
        Ok(bytes) => reply(StatusCode::OK, content_type(&path), bytes),
        Err(_) => not_found(),
    }
}

/// A server running on its own thread; stops when dropped.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_now()
    }

    fn shutdown_now(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .map_err(|_| io::Error::other("server thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.shutdown_now();
    }
}

fn runtime() -> io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_io()
        .build()
}

/// Bind `addr` and serve in the background.
pub fn spawn(service: Arc<Service>, addr: &str) -> io::Result<RunningServer> {
    let listener = std::net::TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let shared = Arc::new(Shared::new(service));
    let (tx, rx) = oneshot::channel();
    let inner = shared.clone();
    let thread = std::thread::spawn(move || {
        runtime()?.block_on(async move {
            let listener = TcpListener::from_std(listener)?;
            tokio::select! {
                r = serve(listener, inner) => r,
                _ = rx => Ok(()),
            }
        })
    });
    Ok(RunningServer {
        addr: local,
        shared,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Bind `addr`, report the bound address, and serve until the process ends.
pub fn run(service: Arc<Service>, addr: &str, on_bound: impl FnOnce(SocketAddr)) -> io::Result<()> {
    let shared = Arc::new(Shared::new(service));
    runtime()?.block_on(async move {
        let listener = TcpListener::bind(addr).await?;
        on_bound(listener.local_addr()?);
        serve(listener, shared).await
    })
}
