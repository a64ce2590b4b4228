//! Uniform sentence scoring over any protocol backend.
//!
//! Sentences are stored without terminal punctuation; the gateway appends
//! the period. In concatenation mode the scored string is
//! `"<prime>. <target>."` and the target region starts at the separator
//! space, so a tokenizer that glues the space onto the first target word
//! (`" The"`) still lands wholly inside it. A token spanning the period and
//! the space is rejected rather than split.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::backend::{BackendDescriptor, BackendKind, Mode, Transport, TransportCallError};
use crate::protocol::{char_len, ErrorKind, Op, Request, Response, WireToken};

/// Absolute tolerance (scaled by magnitude) for total = Σ token log-probs.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProb {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub lp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    /// Scored region as sent, including the terminal period.
    pub text: String,
    pub tokens: Vec<TokenLogProb>,
    pub total: f64,
    pub backend: BackendDescriptor,
    /// Prime string for concat/finetune scores.
    pub conditioning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol violation: {msg}; payload: {raw}")]
    Protocol { msg: String, raw: String },
    #[error("token spans do not tile [{start}, {end}): {detail}")]
    SpanMismatch { start: usize, end: usize, detail: String },
    #[error("token `{token}` [{start}, {end}) straddles the prime/target boundary at {boundary}")]
    BoundaryStraddle {
        token: String,
        start: usize,
        end: usize,
        boundary: usize,
    },
    #[error("training diverged on prime `{prime}`: {msg}")]
    Divergence { prime: String, msg: String },
    #[error("backend error ({kind:?}): {msg}")]
    Backend { kind: ErrorKind, msg: String },
}

impl ScoreError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScoreError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    pub const NONE: RetryPolicy = RetryPolicy {
        attempts: 1,
        base_delay: Duration::ZERO,
    };

    /// 3 attempts, exponential backoff from 1s. Only HTTP backends retry.
    pub fn for_kind(kind: &BackendKind) -> Self {
        match kind {
            BackendKind::Http { .. } => RetryPolicy {
                attempts: 3,
                base_delay: Duration::from_secs(1),
            },
            BackendKind::Oracle { .. } | BackendKind::Worker { .. } => RetryPolicy::NONE,
        }
    }
}

pub struct Gateway {
    descriptor: BackendDescriptor,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    config: serde_json::Value,
    next_id: AtomicU64,
}

impl Gateway {
    pub fn new(descriptor: BackendDescriptor, transport: Arc<dyn Transport>, config: serde_json::Value) -> Self {
        let retry = RetryPolicy::for_kind(&descriptor.kind);
        Self {
            descriptor,
            transport,
            retry,
            config,
            next_id: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    /// Scores a standalone sentence (period appended).
    pub fn score_sentence(&self, sentence: &str) -> Result<SentenceScore, ScoreError> {
        require_text("sentence", sentence)?;
        let text = format!("{sentence}.");
        let tokens = self.call(Op::Score, &text, None)?;
        let region = (0, char_len(&text));
        let tokens = select_region(tokens, region, None)?;
        Ok(self.assemble(text, tokens, None))
    }

    /// Scores `target` conditioned on `prime` in one context window.
    pub fn score_conditional(&self, prime: &str, target: &str) -> Result<SentenceScore, ScoreError> {
        if self.descriptor.mode != Mode::Concat {
            return Err(ScoreError::Precondition(format!(
                "score_conditional needs concat mode, backend is in {} mode",
                self.descriptor.mode
            )));
        }
        require_text("prime", prime)?;
        require_text("target", target)?;
        let text = concatenate(prime, target);
        let boundary = char_len(prime) + 1;
        let tokens = self.call(Op::ScoreConditional, &text, Some(prime))?;
        let tokens = select_region(tokens, (boundary, char_len(&text)), Some(boundary))?;
        let target_text: String = text.chars().skip(boundary).collect();
        Ok(self.assemble(target_text, tokens, Some(prime.to_string())))
    }

    /// Has the backend train on `prime` from pristine weights, then score `target`.
    pub fn score_finetuned(&self, prime: &str, target: &str) -> Result<SentenceScore, ScoreError> {
        if self.descriptor.mode != Mode::Finetune {
            return Err(ScoreError::Precondition(format!(
                "score_finetuned needs finetune mode, backend is in {} mode",
                self.descriptor.mode
            )));
        }
        if matches!(self.descriptor.kind, BackendKind::Http { .. }) {
            return Err(ScoreError::Precondition("http backends cannot fine-tune".into()));
        }
        require_text("prime", prime)?;
        require_text("target", target)?;
        let text = format!("{target}.");
        let prime_text = format!("{prime}.");
        let tokens = match self.call(Op::FinetuneScore, &text, Some(&prime_text)) {
            Err(ScoreError::Backend {
                kind: ErrorKind::Divergence,
                msg,
            }) => {
                return Err(ScoreError::Divergence {
                    prime: prime.to_string(),
                    msg,
                })
            }
            other => other?,
        };
        let tokens = select_region(tokens, (0, char_len(&text)), None)?;
        Ok(self.assemble(text, tokens, Some(prime.to_string())))
    }

    fn assemble(&self, text: String, tokens: Vec<TokenLogProb>, conditioning: Option<String>) -> SentenceScore {
        SentenceScore {
            text,
            total: tokens.iter().map(|t| t.lp).sum(),
            tokens,
            backend: self.descriptor.clone(),
            conditioning,
        }
    }

    fn call(&self, op: Op, text: &str, prime: Option<&str>) -> Result<Vec<WireToken>, ScoreError> {
        let id = format!("req-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let request = Request {
            id: id.clone(),
            op,
            text: text.to_string(),
            prime: prime.map(str::to_string),
            config: self.config.clone(),
        };
        let mut delay = self.retry.base_delay;
        let mut attempt = 1;
        loop {
            match self.call_once(&request) {
                Err(e) if e.is_retryable() && attempt < self.retry.attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn call_once(&self, request: &Request) -> Result<Vec<WireToken>, ScoreError> {
        let response = self.transport.call(request).map_err(|e| match e {
            TransportCallError::Transport(t) => ScoreError::Transport(t.0),
            TransportCallError::Protocol { msg, raw } => ScoreError::Protocol { msg, raw },
        })?;
        if response.id() != request.id {
            return Err(ScoreError::Protocol {
                msg: format!("response id `{}` does not match request `{}`", response.id(), request.id),
                raw: crate::protocol::encode_response(&response),
            });
        }
        match response {
            Response::Failed(f) => match f.error.kind {
                ErrorKind::Transport => Err(ScoreError::Transport(f.error.msg)),
                kind => Err(ScoreError::Backend { kind, msg: f.error.msg }),
            },
            Response::Scored(s) => {
                let sum: f64 = s.tokens.iter().map(|t| t.lp).sum();
                let raw = || crate::protocol::encode_response(&Response::Scored(s.clone()));
                if let Some(bad) = s.tokens.iter().find(|t| !(t.lp.is_finite() && t.lp <= 0.0)) {
                    return Err(ScoreError::Protocol {
                        msg: format!("token `{}` has invalid log-prob {}", bad.t, bad.lp),
                        raw: raw(),
                    });
                }
                if (s.total - sum).abs() > SUM_TOLERANCE * sum.abs().max(1.0) {
                    return Err(ScoreError::Protocol {
                        msg: format!("total {} differs from token sum {sum}", s.total),
                        raw: raw(),
                    });
                }
                Ok(s.tokens)
            }
        }
    }
}

fn require_text(what: &str, s: &str) -> Result<(), ScoreError> {
    if s.trim().is_empty() {
        Err(ScoreError::Precondition(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

/// `"<prime>. <target>."`
pub fn concatenate(prime: &str, target: &str) -> String {
    format!("{prime}. {target}.")
}

/// Keeps tokens inside `[start, end)`, dropping tokens wholly before
/// `boundary`, and checks that the kept spans tile the region exactly.
fn select_region(
    tokens: Vec<WireToken>,
    (start, end): (usize, usize),
    boundary: Option<usize>,
) -> Result<Vec<TokenLogProb>, ScoreError> {
    let mut kept = Vec::with_capacity(tokens.len());
    for t in tokens {
        if let Some(b) = boundary {
            if t.end <= b && t.start < b {
                continue;
            }
            if t.start < b && t.end > b {
                return Err(ScoreError::BoundaryStraddle {
                    token: t.t,
                    start: t.start,
                    end: t.end,
                    boundary: b,
                });
            }
        }
        kept.push(t);
    }
    kept.sort_by_key(|t| t.start);
    let mismatch = |detail: String| ScoreError::SpanMismatch { start, end, detail };
    let mut cursor = start;
    for t in &kept {
        if t.start != cursor || t.end <= t.start {
            return Err(mismatch(format!(
                "token `{}` spans [{}, {}), expected start {cursor}",
                t.t, t.start, t.end
            )));
        }
        cursor = t.end;
    }
    if cursor != end {
        return Err(mismatch(format!("coverage ends at {cursor}")));
    }
    Ok(kept
        .into_iter()
        .map(|t| TokenLogProb {
            text: t.t,
            start: t.start,
            end: t.end,
            lp: t.lp,
        })
        .collect())
}
