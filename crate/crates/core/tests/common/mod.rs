#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

use priming_ife::backend::{BackendDescriptor, BackendKind, InProcess, Mode};
use priming_ife::corpus::{generate_corpus, CorpusConfig, CorpusRecord};
use priming_ife::gateway::Gateway;
use priming_ife::lexicon::{load_lexicon, Lexicon};
use priming_ife::oracle::{OracleConfig, OracleKind, OracleLm};
use priming_ife::runner::{score_item, BaselineCache, ScoreRecord};
use rayon::prelude::*;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn lexicon() -> Lexicon {
    load_lexicon(data_dir().join("lexicon.toml")).unwrap()
}

pub fn oracle_gateway(kind: OracleKind, lexicon: &Lexicon, config: serde_json::Value, mode: Mode) -> Gateway {
    let lm = OracleLm::from_config(kind, &OracleConfig::from_json(&config).unwrap(), lexicon).unwrap();
    let backend = BackendKind::Oracle {
        name: kind.to_string(),
    };
    let label = backend.to_string();
    let descriptor = BackendDescriptor::new(backend, mode, label).unwrap();
    Gateway::new(descriptor, Arc::new(InProcess::new(Arc::new(lm))), config)
}

pub fn corpus_records(lexicon: &Lexicon, config: &CorpusConfig) -> Vec<CorpusRecord> {
    generate_corpus(lexicon, config)
        .unwrap()
        .map(|p| p.unwrap().to_record(config.seed).unwrap())
        .collect()
}

/// Scores every record in memory, in parallel.
pub fn score_all(gateway: &Gateway, records: &[CorpusRecord], mode: Mode) -> Vec<ScoreRecord> {
    let cache = BaselineCache::default();
    let done = HashSet::new();
    records
        .par_iter()
        .map(|r| score_item(gateway, r, mode, &cache, &done).unwrap())
        .flatten()
        .collect()
}

pub const TINY_LEXICON: &str = r#"
[[verbs]]
lemma = "give"
past = "gave"
prep = "to"
frames.subject = ["girl", "boy", "doctor", "judge", "chef", "nurse"]
frames.dobj = ["book", "letter", "cake", "coffee", "map", "ticket"]
frames.iobj = ["girl", "boy", "doctor", "judge", "chef", "nurse"]

[[verbs]]
lemma = "send"
past = "sent"
prep = "to"
frames.subject = ["girl", "boy", "doctor", "judge", "chef", "nurse"]
frames.dobj = ["book", "letter", "map", "ticket"]
frames.iobj = ["girl", "boy", "doctor", "judge", "chef", "nurse"]

[[verbs]]
lemma = "buy"
past = "bought"
prep = "for"
frames.subject = ["girl", "boy", "doctor", "judge", "chef", "nurse"]
frames.dobj = ["book", "cake", "coffee", "ticket"]
frames.iobj = ["girl", "boy", "doctor", "judge", "chef", "nurse"]

[[nouns]]
lemma = "girl"
[[nouns]]
lemma = "boy"
[[nouns]]
lemma = "doctor"
[[nouns]]
lemma = "judge"
[[nouns]]
lemma = "chef"
[[nouns]]
lemma = "nurse"
[[nouns]]
lemma = "book"
[[nouns]]
lemma = "letter"
[[nouns]]
lemma = "cake"
[[nouns]]
lemma = "coffee"
[[nouns]]
lemma = "map"
[[nouns]]
lemma = "ticket"
"#;

pub fn tiny_lexicon() -> Lexicon {
    Lexicon::from_toml_str(TINY_LEXICON).unwrap()
}
