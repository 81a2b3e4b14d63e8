//! Episode server: external agents and human players drive grid-house QA
//! episodes over JSON, either as length-prefixed frames on a persistent
//! connection or as one HTTP request per call. Completed episodes are
//! recorded and logged in the harness formats.

pub mod client;
pub mod net;
pub mod protocol;
pub mod service;

pub use client::{http_call, http_raw, ClientError, FramedClient};
pub use net::{run, spawn, RunningServer, Shared, MAX_FRAME};
pub use protocol::{AgentTag, Control, ErrorCode, Request, Response};
pub use service::{Service, ServiceOptions, Session};
