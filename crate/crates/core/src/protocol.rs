//! JSON wire protocol shared by every scoring backend.
//!
//! One request per HTTP POST. Token spans are character offsets into the
//! request `text`, and log-probabilities are natural-log.
//!
//! | op                  | `text` holds                 | `prime` holds     |
//! |---------------------|------------------------------|-------------------|
//! | `score`             | `"<sentence>."`              | null              |
//! | `score_conditional` | `"<prime>. <target>."`       | `"<prime>"`       |
//! | `finetune_score`    | `"<target>."`                | `"<prime>."`      |

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Score,
    ScoreConditional,
    FinetuneScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub op: Op,
    pub text: String,
    #[serde(default)]
    pub prime: Option<String>,
    #[serde(default = "empty_object")]
    pub config: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireToken {
    pub t: String,
    pub start: usize,
    pub end: usize,
    pub lp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub tokens: Vec<WireToken>,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Transport,
    Oom,
    Divergence,
    BadRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub kind: ErrorKind,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failed {
    pub id: String,
    pub error: WireError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Failed(Failed),
    Scored(Scored),
}

impl Response {
    pub fn error(id: impl Into<String>, kind: ErrorKind, msg: impl Into<String>) -> Self {
        Response::Failed(Failed {
            id: id.into(),
            error: WireError {
                kind,
                msg: msg.into(),
            },
        })
    }

    pub fn id(&self) -> &str {
        match self {
            Response::Failed(f) => &f.id,
            Response::Scored(s) => &s.id,
        }
    }
}

/// Anything that answers protocol requests: oracles in-process, or a server.
pub trait ScoringService: Send + Sync {
    fn handle(&self, request: &Request) -> Response;
}

pub fn encode_request(r: &Request) -> String {
    serde_json::to_string(r).expect("request serializes")
}

pub fn decode_request(s: &str) -> serde_json::Result<Request> {
    serde_json::from_str(s)
}

pub fn encode_response(r: &Response) -> String {
    serde_json::to_string(r).expect("response serializes")
}

pub fn decode_response(s: &str) -> serde_json::Result<Response> {
    serde_json::from_str(s)
}

/// Length in characters, the unit of wire spans.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}
