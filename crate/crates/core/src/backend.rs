//! Backend descriptors and the transports that carry protocol requests.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::protocol::{decode_request, decode_response, encode_request, encode_response, Request, Response, ScoringService};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Concat,
    Finetune,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Concat => "concat",
            Mode::Finetune => "finetune",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "concat" => Ok(Mode::Concat),
            "finetune" => Ok(Mode::Finetune),
            other => Err(format!("unknown mode `{other}` (baseline|concat|finetune)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Oracle { name: String },
    Http { endpoint: String },
    Worker { endpoint: String },
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Oracle { name } => write!(f, "oracle:{name}"),
            BackendKind::Http { endpoint } => write!(f, "http:{endpoint}"),
            BackendKind::Worker { endpoint } => write!(f, "worker:{endpoint}"),
        }
    }
}

impl FromStr for BackendKind {
    type Err = String;

    /// Parses `oracle:NAME`, `http:URL` or `worker:URL`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("backend `{s}` must look like oracle:NAME, http:URL or worker:URL"))?;
        if rest.is_empty() {
            return Err(format!("backend `{s}` has an empty target"));
        }
        match scheme {
            "oracle" => Ok(BackendKind::Oracle { name: rest.to_string() }),
            "http" => Ok(BackendKind::Http {
                endpoint: rest.to_string(),
            }),
            "worker" => Ok(BackendKind::Worker {
                endpoint: rest.to_string(),
            }),
            other => Err(format!("unknown backend kind `{other}`")),
        }
    }
}

/// Which backend, in which mode, produced a score.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub mode: Mode,
    pub model_label: String,
}

impl BackendDescriptor {
    pub fn new(kind: BackendKind, mode: Mode, model_label: impl Into<String>) -> Result<Self, String> {
        if mode == Mode::Finetune && matches!(kind, BackendKind::Http { .. }) {
            return Err("finetune mode requires a worker or oracle backend".into());
        }
        Ok(Self {
            kind,
            mode,
            model_label: model_label.into(),
        })
    }

    /// Stable label used in score files.
    pub fn label(&self) -> String {
        self.kind.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

/// Carries one request to a backend and returns its decoded response.
pub trait Transport: Send + Sync {
    fn call(&self, request: &Request) -> Result<Response, TransportCallError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportCallError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    /// Response body that does not decode; carries the raw payload.
    #[error("undecodable response: {msg}; payload: {raw}")]
    Protocol { msg: String, raw: String },
}

/// Runs a service in-process but still through JSON encode/decode, so it
/// sees exactly what a remote backend would.
pub struct InProcess {
    service: Arc<dyn ScoringService>,
}

impl InProcess {
    pub fn new(service: Arc<dyn ScoringService>) -> Self {
        Self { service }
    }
}

impl Transport for InProcess {
    fn call(&self, request: &Request) -> Result<Response, TransportCallError> {
        let wire = encode_request(request);
        let decoded = decode_request(&wire).map_err(|e| TransportCallError::Protocol {
            msg: e.to_string(),
            raw: wire.clone(),
        })?;
        let raw = encode_response(&self.service.handle(&decoded));
        decode_response(&raw).map_err(|e| TransportCallError::Protocol { msg: e.to_string(), raw })
    }
}

/// JSON over HTTP POST.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { url: url.into(), agent }
    }
}

impl Transport for HttpTransport {
    fn call(&self, request: &Request) -> Result<Response, TransportCallError> {
        let body = encode_request(request);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body.as_bytes())
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let raw = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        match decode_response(&raw) {
            Ok(r) => Ok(r),
            Err(_) if status >= 500 => Err(TransportError(format!("HTTP {status}: {raw}")).into()),
            Err(e) => Err(TransportCallError::Protocol { msg: e.to_string(), raw }),
        }
    }
}
