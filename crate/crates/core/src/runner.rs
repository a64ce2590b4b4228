//! Batch scoring of a corpus into a resumable JSONL score file.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Mode;
use crate::corpus::{CorpusRecord, PronounCondition};
use crate::gateway::{Gateway, ScoreError};
use crate::sentence::Structure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Baseline,
    Primed,
}

/// One line of the scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub pair_id: String,
    pub role: Role,
    pub prime_structure: Option<Structure>,
    pub target_structure: Structure,
    pub prime_verb: String,
    pub target_verb: String,
    pub condition: PronounCondition,
    pub total_lp: f64,
    pub backend: String,
    pub mode: Mode,
}

impl ScoreRecord {
    /// Identity used to skip already-scored items on resume.
    pub fn key(&self) -> String {
        record_key(&self.condition, &self.pair_id, self.role, self.prime_structure, self.target_structure)
    }
}

fn record_key(
    condition: &PronounCondition,
    pair_id: &str,
    role: Role,
    prime: Option<Structure>,
    target: Structure,
) -> String {
    let prime = prime.map_or("-", Structure::as_str);
    let role = match role {
        Role::Baseline => "baseline",
        Role::Primed => "primed",
    };
    format!("{condition}/{pair_id}/{role}/{prime}/{target}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub item: String,
    pub error: String,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunSummary {
    pub written: usize,
    pub skipped: usize,
    pub ledger: Vec<LedgerEntry>,
}

impl RunSummary {
    pub fn is_clean(&self) -> bool {
        self.ledger.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot build thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Baseline totals keyed by scored text; shared across items and threads.
#[derive(Default)]
pub struct BaselineCache {
    totals: Mutex<HashMap<String, f64>>,
}

impl BaselineCache {
    pub fn len(&self) -> usize {
        self.totals.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_score(&self, gateway: &Gateway, text: &str) -> Result<f64, ScoreError> {
        if let Some(&v) = self.totals.lock().unwrap().get(text) {
            return Ok(v);
        }
        let total = gateway.score_sentence(text)?.total;
        self.totals.lock().unwrap().insert(text.to_string(), total);
        Ok(total)
    }
}

/// Scores one pair: two baselines, plus the four primed combinations unless
/// `mode` is baseline. Records whose key is in `done` are not rescored.
pub fn score_item(
    gateway: &Gateway,
    item: &CorpusRecord,
    mode: Mode,
    cache: &BaselineCache,
    done: &HashSet<String>,
) -> Result<Vec<ScoreRecord>, ScoreError> {
    let backend = gateway.descriptor().label();
    let record = |role, prime_structure, target_structure, total_lp| ScoreRecord {
        pair_id: item.pair_id.clone(),
        role,
        prime_structure,
        target_structure,
        prime_verb: item.prime_verb.clone(),
        target_verb: item.target_verb.clone(),
        condition: item.condition,
        total_lp,
        backend: backend.clone(),
        mode,
    };
    let is_done = |role, p, t| done.contains(&record_key(&item.condition, &item.pair_id, role, p, t));

    let mut out = Vec::with_capacity(6);
    for t in Structure::BOTH {
        if !is_done(Role::Baseline, None, t) {
            let total = cache.get_or_score(gateway, item.target(t))?;
            out.push(record(Role::Baseline, None, t, total));
        }
    }
    if mode == Mode::Baseline {
        return Ok(out);
    }
    for t in Structure::BOTH {
        for p in Structure::BOTH {
            if is_done(Role::Primed, Some(p), t) {
                continue;
            }
            let score = match mode {
                Mode::Concat => gateway.score_conditional(item.prime(p), item.target(t))?,
                Mode::Finetune => gateway
                    .score_finetuned(item.prime(p), item.target(t))
                    .map_err(|e| match e {
                        ScoreError::Divergence { msg, .. } => ScoreError::Divergence {
                            prime: format!("{} ({})", item.pair_id, item.prime(p)),
                            msg,
                        },
                        other => other,
                    })?,
                Mode::Baseline => unreachable!(),
            };
            out.push(record(Role::Primed, Some(p), t, score.total));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub concurrency: usize,
    /// Pairs scored between flushes to the output file.
    pub chunk_size: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Concat,
            concurrency: 1,
            chunk_size: 256,
        }
    }
}

/// Ledger path written next to the scores file.
pub fn ledger_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".errors.jsonl");
    PathBuf::from(p)
}

/// Reads valid records from an existing scores file, rewriting it without
/// any truncated or corrupt lines.
pub fn load_existing(out: &Path) -> Result<Vec<ScoreRecord>, RunError> {
    if !out.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(out).map_err(io_err(out))?;
    let mut records = Vec::new();
    let mut dirty = false;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<ScoreRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) => dirty = true,
        }
    }
    if dirty || (!text.is_empty() && !text.ends_with('\n')) {
        let mut w = BufWriter::new(File::create(out).map_err(io_err(out))?);
        for r in &records {
            writeln!(w, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io_err(out))?;
        }
        w.flush().map_err(io_err(out))?;
    }
    Ok(records)
}

/// Scores every corpus line of `corpus` into `out`, skipping records already
/// present there. Per-item failures (including malformed corpus lines) go to
/// the ledger and do not stop the run.
pub fn run_scoring(gateway: &Gateway, corpus: &Path, out: &Path, options: &RunOptions) -> Result<RunSummary, RunError> {
    let done: HashSet<String> = load_existing(out)?.iter().map(ScoreRecord::key).collect();
    let reader = BufReader::new(File::open(corpus).map_err(io_err(corpus))?);
    let mut writer = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(out)
            .map_err(io_err(out))?,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let cache = BaselineCache::default();
    let mut summary = RunSummary::default();
    let per_item = if options.mode == Mode::Baseline { 2 } else { 6 };

    let mut chunk: Vec<Result<CorpusRecord, LedgerEntry>> = Vec::with_capacity(options.chunk_size);
    let mut lines = reader.lines().enumerate().peekable();
    while lines.peek().is_some() {
        chunk.clear();
        while chunk.len() < options.chunk_size.max(1) {
            let Some((n, line)) = lines.next() else { break };
            let line = line.map_err(io_err(corpus))?;
            if line.trim().is_empty() {
                continue;
            }
            chunk.push(serde_json::from_str::<CorpusRecord>(&line).map_err(|e| LedgerEntry {
                item: format!("line {}", n + 1),
                error: format!("malformed corpus item: {e}"),
            }));
        }
        let results: Vec<Result<Vec<ScoreRecord>, LedgerEntry>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|item| {
                    let item = item.as_ref().map_err(Clone::clone)?;
                    score_item(gateway, item, options.mode, &cache, &done).map_err(|e| LedgerEntry {
                        item: item.pair_id.clone(),
                        error: e.to_string(),
                    })
                })
                .collect()
        });
        for r in results {
            match r {
                Ok(records) => {
                    summary.skipped += per_item - records.len();
                    for rec in &records {
                        writeln!(writer, "{}", serde_json::to_string(rec).expect("record serializes"))
                            .map_err(io_err(out))?;
                    }
                    summary.written += records.len();
                }
                Err(entry) => summary.ledger.push(entry),
            }
        }
        writer.flush().map_err(io_err(out))?;
    }

    let ledger = ledger_path(out);
    if summary.ledger.is_empty() {
        if ledger.exists() {
            std::fs::remove_file(&ledger).map_err(io_err(&ledger))?;
        }
    } else {
        let mut w = BufWriter::new(File::create(&ledger).map_err(io_err(&ledger))?);
        for e in &summary.ledger {
            writeln!(w, "{}", serde_json::to_string(e).expect("ledger serializes")).map_err(io_err(&ledger))?;
        }
        w.flush().map_err(io_err(&ledger))?;
    }
    Ok(summary)
}

/// Reads a scores file.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunError::Io {
                path: format!("{}:{}", path.display(), i + 1),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })
        })
        .collect()
}
