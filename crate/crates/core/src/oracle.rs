//! Closed-form synthetic language models.
//!
//! Each verb V has a PD logit `theta[V]`; with a global structure logit `g`,
//! P(PD | V) = σ(theta[V] + g) and P(DO | V) = 1 − P(PD | V). A sentence's
//! log-probability is a content term (per-word constant, identical for both
//! realizations) plus the log of its structure probability.
//!
//! Three context models sit on top:
//! - [`OracleKind::Static`]: ignores context.
//! - [`OracleKind::Transient`]: adds `delta` to the logit of the prime's
//!   structure, whatever the prime verb.
//! - [`OracleKind::ErrorDriven`]: takes one gradient step of size `eta` on
//!   `g` toward the observed prime structure, then scores the target.
//!
//! The oracles only see protocol requests, so the gateway treats them like
//! any remote backend. They emit one pseudo-token per sentence region.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::lexicon::Lexicon;
use crate::protocol::{char_len, ErrorKind, Op, Request, Response, Scored, ScoringService, WireToken};
use crate::sentence::Structure;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("unknown verb in `{0}`")]
    UnknownVerb(String),
    #[error("verb `{0}` has no theta entry")]
    MissingTheta(String),
    #[error("bias spread must lie in (0, 0.5), got {0}")]
    BadSpread(f64),
    #[error("need at least 2 verbs, got {0}")]
    TooFewVerbs(usize),
    #[error("invalid oracle parameter: {0}")]
    BadParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleKind {
    Static,
    Transient,
    ErrorDriven,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Static => "static",
            OracleKind::Transient => "transient",
            OracleKind::ErrorDriven => "errordriven",
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(OracleKind::Static),
            "transient" => Ok(OracleKind::Transient),
            "errordriven" => Ok(OracleKind::ErrorDriven),
            other => Err(format!("unknown oracle `{other}` (static|transient|errordriven)")),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// ln σ(x) without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sign(s: Structure) -> f64 {
    match s {
        Structure::Prepositional => 1.0,
        Structure::DoubleObject => -1.0,
    }
}

/// Default per-word content cost, ln(1/50).
pub fn default_word_cost() -> f64 {
    (1.0f64 / 50.0).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    pub theta: BTreeMap<String, f64>,
    /// Global structure logit.
    pub g: f64,
    pub eta: f64,
    pub delta: f64,
    /// Log-probability charged per content word (≤ 0).
    pub word_cost: f64,
    /// When set, targets scored under conditioning use this logit instead of
    /// their verb's, so PrimeBias reflects the prime alone.
    pub target_theta: Option<f64>,
}

impl OracleParams {
    pub fn new(theta: BTreeMap<String, f64>) -> Self {
        Self {
            theta,
            g: 0.0,
            eta: 0.0,
            delta: 0.0,
            word_cost: default_word_cost(),
            target_theta: None,
        }
    }

    /// Params whose verbs have exactly the given PD probabilities.
    pub fn from_pd_probabilities(p_pd: &BTreeMap<String, f64>) -> Result<Self, OracleError> {
        let mut theta = BTreeMap::new();
        for (verb, &p) in p_pd {
            if !(p > 0.0 && p < 1.0) {
                return Err(OracleError::BadParam(format!("p_pd[{verb}] = {p} outside (0, 1)")));
            }
            theta.insert(verb.clone(), logit(p));
        }
        Ok(Self::new(theta))
    }

    fn validate(&self) -> Result<(), OracleError> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(OracleError::BadParam(format!("eta must be non-negative, got {}", self.eta)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(OracleError::BadParam(format!("delta must be non-negative, got {}", self.delta)));
        }
        if !(self.word_cost <= 0.0 && self.word_cost.is_finite()) {
            return Err(OracleError::BadParam(format!("word cost must be <= 0, got {}", self.word_cost)));
        }
        Ok(())
    }

    fn theta_of(&self, verb: &str) -> Result<f64, OracleError> {
        self.theta
            .get(verb)
            .copied()
            .ok_or_else(|| OracleError::MissingTheta(verb.to_string()))
    }

    /// P(PD) for `verb` under the pristine global logit.
    pub fn pd_probability(&self, verb: &str) -> Result<f64, OracleError> {
        Ok(sigmoid(self.theta_of(verb)? + self.g))
    }
}

/// PD logits evenly spaced in probability on `[0.5 - spread, 0.5 + spread]`,
/// assigned to verb positions by a seeded shuffle.
pub fn paper_shaped_thetas(verb_count: usize, spread: f64, seed: u64) -> Result<Vec<f64>, OracleError> {
    if verb_count < 2 {
        return Err(OracleError::TooFewVerbs(verb_count));
    }
    if !(spread > 0.0 && spread < 0.5) {
        return Err(OracleError::BadSpread(spread));
    }
    let lo = 0.5 - spread;
    let step = 2.0 * spread / (verb_count - 1) as f64;
    let mut thetas: Vec<f64> = (0..verb_count).map(|i| logit(lo + step * i as f64)).collect();
    thetas.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(thetas)
}

pub fn make_paper_shaped_params(verbs: &[String], spread: f64, seed: u64) -> Result<OracleParams, OracleError> {
    let thetas = paper_shaped_thetas(verbs.len(), spread, seed)?;
    Ok(OracleParams::new(verbs.iter().cloned().zip(thetas).collect()))
}

/// What the oracle needs to know about a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFacts {
    pub verb: String,
    pub structure: Structure,
    /// Words excluding the dative preposition; equal for DO and PD.
    pub content_words: usize,
}

/// Maps past-tense forms to verbs to classify surface strings.
#[derive(Debug, Clone)]
pub struct SentenceAnalyzer {
    verbs: HashMap<String, (String, &'static str)>,
}

impl SentenceAnalyzer {
    pub fn from_lexicon(lexicon: &Lexicon) -> Self {
        let verbs = lexicon
            .verbs()
            .iter()
            .map(|v| (v.past.clone(), (v.lemma.clone(), v.prep.as_str())))
            .collect();
        Self { verbs }
    }

    pub fn analyze(&self, sentence: &str) -> Result<SentenceFacts, OracleError> {
        let words: Vec<&str> = sentence.trim().trim_end_matches('.').split_whitespace().collect();
        let (pos, (lemma, prep)) = words
            .iter()
            .enumerate()
            .find_map(|(i, w)| self.verbs.get(*w).map(|v| (i, v)))
            .ok_or_else(|| OracleError::UnknownVerb(sentence.to_string()))?;
        let has_prep = words[pos + 1..].iter().any(|w| w == prep);
        Ok(SentenceFacts {
            verb: lemma.clone(),
            structure: if has_prep {
                Structure::Prepositional
            } else {
                Structure::DoubleObject
            },
            content_words: words.len() - usize::from(has_prep),
        })
    }
}

fn content_term(params: &OracleParams, s: &SentenceFacts) -> f64 {
    params.word_cost * s.content_words as f64
}

/// Context-free log-probability.
pub fn static_score(params: &OracleParams, sentence: &SentenceFacts) -> Result<f64, OracleError> {
    let z = params.theta_of(&sentence.verb)? + params.g;
    Ok(content_term(params, sentence) + log_sigmoid(sign(sentence.structure) * z))
}

fn conditioned_logit(params: &OracleParams, target: &SentenceFacts, g: f64) -> Result<f64, OracleError> {
    let theta = match params.target_theta {
        Some(t) => t,
        None => params.theta_of(&target.verb)?,
    };
    Ok(theta + g)
}

/// Target scored with `delta` added toward the prime's structure.
pub fn transient_conditional(
    params: &OracleParams,
    prime: &SentenceFacts,
    target: &SentenceFacts,
) -> Result<f64, OracleError> {
    params.theta_of(&prime.verb)?;
    let z = conditioned_logit(params, target, params.g)? + params.delta * sign(prime.structure);
    Ok(content_term(params, target) + log_sigmoid(sign(target.structure) * z))
}

/// Global logit after one gradient-ascent step on ln P(prime structure).
pub fn errordriven_update(params: &OracleParams, prime: &SentenceFacts) -> Result<f64, OracleError> {
    let p_pd = sigmoid(params.theta_of(&prime.verb)? + params.g);
    let observed = match prime.structure {
        Structure::Prepositional => 1.0,
        Structure::DoubleObject => 0.0,
    };
    Ok(params.g + params.eta * (observed - p_pd))
}

/// Target scored after the error-driven update; `params` is left untouched.
pub fn errordriven_conditional(
    params: &OracleParams,
    prime: &SentenceFacts,
    target: &SentenceFacts,
) -> Result<f64, OracleError> {
    let g = errordriven_update(params, prime)?;
    let z = conditioned_logit(params, target, g)?;
    Ok(content_term(params, target) + log_sigmoid(sign(target.structure) * z))
}

/// Oracle parameters as supplied in the scoring config block.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub theta_seed: u64,
    pub spread: f64,
    pub eta: f64,
    pub delta: f64,
    pub g: f64,
    pub word_cost: Option<f64>,
    pub target_theta: Option<f64>,
    /// Explicit per-verb PD probabilities; overrides `spread`/`theta_seed`.
    pub p_pd: Option<BTreeMap<String, f64>>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            theta_seed: 0,
            spread: 0.3,
            eta: 1.0,
            delta: 0.4,
            g: 0.0,
            word_cost: None,
            target_theta: None,
            p_pd: None,
        }
    }
}

impl OracleConfig {
    pub fn from_json(value: &serde_json::Value) -> Result<Self, OracleError> {
        serde_json::from_value(value.clone()).map_err(|e| OracleError::BadParam(e.to_string()))
    }

    pub fn build_params(&self, lexicon: &Lexicon) -> Result<OracleParams, OracleError> {
        let mut params = match &self.p_pd {
            Some(p) => OracleParams::from_pd_probabilities(p)?,
            None => {
                let verbs: Vec<String> = lexicon.verbs().iter().map(|v| v.lemma.clone()).collect();
                make_paper_shaped_params(&verbs, self.spread, self.theta_seed)?
            }
        };
        params.g = self.g;
        params.eta = self.eta;
        params.delta = self.delta;
        params.target_theta = self.target_theta;
        if let Some(c) = self.word_cost {
            params.word_cost = c;
        }
        params.validate()?;
        Ok(params)
    }
}

/// A protocol-speaking oracle language model.
#[derive(Debug, Clone)]
pub struct OracleLm {
    kind: OracleKind,
    params: OracleParams,
    analyzer: SentenceAnalyzer,
}

impl OracleLm {
    pub fn new(kind: OracleKind, params: OracleParams, analyzer: SentenceAnalyzer) -> Result<Self, OracleError> {
        params.validate()?;
        Ok(Self { kind, params, analyzer })
    }

    pub fn from_config(kind: OracleKind, config: &OracleConfig, lexicon: &Lexicon) -> Result<Self, OracleError> {
        Self::new(kind, config.build_params(lexicon)?, SentenceAnalyzer::from_lexicon(lexicon))
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn params(&self) -> &OracleParams {
        &self.params
    }

    fn conditional(&self, prime: &SentenceFacts, target: &SentenceFacts) -> Result<f64, OracleError> {
        match self.kind {
            OracleKind::Static => {
                self.params.theta_of(&prime.verb)?;
                let z = conditioned_logit(&self.params, target, self.params.g)?;
                Ok(content_term(&self.params, target) + log_sigmoid(sign(target.structure) * z))
            }
            OracleKind::Transient => transient_conditional(&self.params, prime, target),
            OracleKind::ErrorDriven => errordriven_conditional(&self.params, prime, target),
        }
    }

    fn respond(&self, req: &Request) -> Result<Vec<WireToken>, (ErrorKind, String)> {
        let bad = |msg: String| (ErrorKind::BadRequest, msg);
        if !req.text.ends_with('.') {
            return Err(bad("text must end with a period".into()));
        }
        match req.op {
            Op::Score => {
                let facts = self.analyzer.analyze(&req.text).map_err(|e| bad(e.to_string()))?;
                let lp = static_score(&self.params, &facts).map_err(|e| bad(e.to_string()))?;
                Ok(vec![WireToken {
                    t: req.text.clone(),
                    start: 0,
                    end: char_len(&req.text),
                    lp,
                }])
            }
            Op::ScoreConditional => {
                let prime = req.prime.as_deref().ok_or_else(|| bad("missing prime".into()))?;
                let target = req
                    .text
                    .strip_prefix(prime)
                    .and_then(|rest| rest.strip_prefix(". "))
                    .ok_or_else(|| bad("text must be `<prime>. <target>.`".into()))?;
                let p = self.analyzer.analyze(prime).map_err(|e| bad(e.to_string()))?;
                let t = self.analyzer.analyze(target).map_err(|e| bad(e.to_string()))?;
                let prime_lp = static_score(&self.params, &p).map_err(|e| bad(e.to_string()))?;
                let target_lp = self.conditional(&p, &t).map_err(|e| bad(e.to_string()))?;
                let boundary = char_len(prime) + 1;
                Ok(vec![
                    WireToken {
                        t: format!("{prime}."),
                        start: 0,
                        end: boundary,
                        lp: prime_lp,
                    },
                    WireToken {
                        t: format!(" {target}"),
                        start: boundary,
                        end: char_len(&req.text),
                        lp: target_lp,
                    },
                ])
            }
            Op::FinetuneScore => {
                if self.kind != OracleKind::ErrorDriven {
                    return Err(bad(format!("oracle `{}` does not support fine-tuning", self.kind)));
                }
                let prime = req.prime.as_deref().ok_or_else(|| bad("missing prime".into()))?;
                let p = self.analyzer.analyze(prime).map_err(|e| bad(e.to_string()))?;
                let t = self.analyzer.analyze(&req.text).map_err(|e| bad(e.to_string()))?;
                let lp = errordriven_conditional(&self.params, &p, &t).map_err(|e| bad(e.to_string()))?;
                if !lp.is_finite() {
                    return Err((ErrorKind::Divergence, format!("non-finite score after update on `{prime}`")));
                }
                Ok(vec![WireToken {
                    t: req.text.clone(),
                    start: 0,
                    end: char_len(&req.text),
                    lp,
                }])
            }
        }
    }
}

impl ScoringService for OracleLm {
    fn handle(&self, request: &Request) -> Response {
        match self.respond(request) {
            Ok(tokens) => Response::Scored(Scored {
                id: request.id.clone(),
                total: tokens.iter().map(|t| t.lp).sum(),
                tokens,
            }),
            Err((kind, msg)) => Response::error(request.id.clone(), kind, msg),
        }
    }
}
