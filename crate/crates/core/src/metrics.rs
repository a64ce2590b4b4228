//! Verb biases and PrimeBias values from score records.
//!
//! Both quantities are means of a normalized two-way share
//! P(PD) / (P(PD) + P(DO)) taken in log space. Verb bias averages that share
//! over baseline sentence pairs of a verb. PrimeBias averages it over every
//! (target, prime sentence) item primed by a verb in a given structure, as a
//! flat mean.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::PronounCondition;
use crate::runner::{Role, ScoreRecord};
use crate::sentence::Structure;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("pair `{pair_id}` has no {missing} counterpart")]
    MissingCounterpart { pair_id: String, missing: Structure },
    #[error("no scores for verb `{0}`")]
    EmptyGroup(String),
    #[error("no baseline scores")]
    NoBaseline,
    #[error("records mix runs: {0}")]
    MixedRuns(String),
    #[error("bias table for backend `{table}` cannot be used with scores from `{scores}`")]
    BackendMismatch { table: String, scores: String },
}

/// Share of the first log-probability: exp(a) / (exp(a) + exp(b)).
///
/// Shifts by the larger argument before exponentiating; ties give exactly
/// 0.5, and gaps beyond ~745 nats saturate to exactly 0 or 1.
pub fn normalized_share(lp_a: f64, lp_b: f64) -> f64 {
    let m = lp_a.max(lp_b);
    let a = (lp_a - m).exp();
    let b = (lp_b - m).exp();
    a / (a + b)
}

/// Running mean that merges exactly across shards.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    pub sum: f64,
    pub n: usize,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            sum: self.sum + other.sum,
            n: self.n + other.n,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerbBias {
    pub pd_bias: f64,
    pub n: usize,
}

impl VerbBias {
    pub fn do_bias(&self) -> f64 {
        1.0 - self.pd_bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbBiasTable {
    pub entries: BTreeMap<String, VerbBias>,
    pub backend: String,
    pub condition: PronounCondition,
}

impl VerbBiasTable {
    pub fn get(&self, verb: &str) -> Option<&VerbBias> {
        self.entries.get(verb)
    }
}

/// Backend and condition shared by all records, or an error naming the mix.
pub fn run_identity(records: &[ScoreRecord]) -> Result<(String, PronounCondition), MetricsError> {
    let first = records.first().ok_or(MetricsError::NoBaseline)?;
    for r in records {
        if r.backend != first.backend || r.condition != first.condition {
            return Err(MetricsError::MixedRuns(format!(
                "{}/{} vs {}/{}",
                first.backend, first.condition, r.backend, r.condition
            )));
        }
    }
    Ok((first.backend.clone(), first.condition))
}

/// Splits records into (backend, condition) runs.
pub fn split_runs(records: &[ScoreRecord]) -> BTreeMap<(String, PronounCondition), Vec<ScoreRecord>> {
    let mut runs: BTreeMap<(String, PronounCondition), Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        runs.entry((r.backend.clone(), r.condition)).or_default().push(r.clone());
    }
    runs
}

#[derive(Default)]
struct PairedLp {
    pd: Option<f64>,
    do_: Option<f64>,
}

impl PairedLp {
    fn set(&mut self, s: Structure, lp: f64) {
        match s {
            Structure::Prepositional => self.pd = Some(lp),
            Structure::DoubleObject => self.do_ = Some(lp),
        }
    }

    fn share(&self, pair_id: &str, of: Structure) -> Result<f64, MetricsError> {
        let missing = |s| MetricsError::MissingCounterpart {
            pair_id: pair_id.to_string(),
            missing: s,
        };
        let pd = self.pd.ok_or_else(|| missing(Structure::Prepositional))?;
        let do_ = self.do_.ok_or_else(|| missing(Structure::DoubleObject))?;
        Ok(match of {
            Structure::Prepositional => normalized_share(pd, do_),
            Structure::DoubleObject => normalized_share(do_, pd),
        })
    }
}

/// Mean normalized PD probability of each verb's baseline sentence pairs.
///
/// Records must come from one backend and condition; baseline records are
/// grouped by the verb of the scored sentence and paired by `pair_id`.
pub fn verb_bias(records: &[ScoreRecord]) -> Result<VerbBiasTable, MetricsError> {
    let baseline: Vec<&ScoreRecord> = records.iter().filter(|r| r.role == Role::Baseline).collect();
    if baseline.is_empty() {
        return Err(MetricsError::NoBaseline);
    }
    let owned: Vec<ScoreRecord> = baseline.iter().map(|r| (*r).clone()).collect();
    let (backend, condition) = run_identity(&owned)?;

    let mut groups: BTreeMap<&str, BTreeMap<&str, PairedLp>> = BTreeMap::new();
    for r in &baseline {
        groups
            .entry(r.target_verb.as_str())
            .or_default()
            .entry(r.pair_id.as_str())
            .or_default()
            .set(r.target_structure, r.total_lp);
    }
    let mut entries = BTreeMap::new();
    for (verb, pairs) in groups {
        let mut acc = MeanAccumulator::default();
        for (pair_id, lps) in &pairs {
            acc.push(lps.share(pair_id, Structure::Prepositional)?);
        }
        let pd_bias = acc.mean().ok_or_else(|| MetricsError::EmptyGroup(verb.to_string()))?;
        entries.insert(verb.to_string(), VerbBias { pd_bias, n: acc.n });
    }
    Ok(VerbBiasTable {
        entries,
        backend,
        condition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimeBiasPoint {
    pub verb: String,
    /// PD bias of the prime verb.
    pub x: f64,
    /// Mean normalized probability of `target_structure`.
    pub y: f64,
    pub prime_structure: Structure,
    pub target_structure: Structure,
    pub n: usize,
}

/// PrimeBias(target | prime_structure, verb) from primed records.
pub fn prime_bias(
    records: &[ScoreRecord],
    table: &VerbBiasTable,
    target: Structure,
    prime_structure: Structure,
    verb: &str,
) -> Result<PrimeBiasPoint, MetricsError> {
    let mut items: HashMap<&str, PairedLp> = HashMap::new();
    for r in records {
        if r.role != Role::Primed || r.prime_verb != verb || r.prime_structure != Some(prime_structure) {
            continue;
        }
        if r.backend != table.backend {
            return Err(MetricsError::BackendMismatch {
                table: table.backend.clone(),
                scores: r.backend.clone(),
            });
        }
        items.entry(r.pair_id.as_str()).or_default().set(r.target_structure, r.total_lp);
    }
    if items.is_empty() {
        return Err(MetricsError::EmptyGroup(verb.to_string()));
    }
    let x = table
        .get(verb)
        .ok_or_else(|| MetricsError::EmptyGroup(verb.to_string()))?
        .pd_bias;
    let mut ids: Vec<&&str> = items.keys().collect();
    ids.sort();
    let mut acc = MeanAccumulator::default();
    for id in ids {
        acc.push(items[*id].share(id, target)?);
    }
    Ok(PrimeBiasPoint {
        verb: verb.to_string(),
        x,
        y: acc.mean().expect("non-empty"),
        prime_structure,
        target_structure: target,
        n: acc.n,
    })
}

/// The opposite-target point: y' = 1 − y, everything else unchanged.
pub fn complement(point: &PrimeBiasPoint) -> PrimeBiasPoint {
    PrimeBiasPoint {
        y: 1.0 - point.y,
        target_structure: point.target_structure.opposite(),
        ..point.clone()
    }
}

/// PD-target points for every verb of `table` that occurs as a prime verb,
/// in the given prime structure, sorted by verb.
pub fn prime_bias_points(
    records: &[ScoreRecord],
    table: &VerbBiasTable,
    prime_structure: Structure,
) -> Result<Vec<PrimeBiasPoint>, MetricsError> {
    let mut primed: Vec<&str> = records
        .iter()
        .filter(|r| r.role == Role::Primed)
        .map(|r| r.prime_verb.as_str())
        .collect();
    primed.sort_unstable();
    primed.dedup();
    primed
        .into_iter()
        .map(|v| prime_bias(records, table, Structure::Prepositional, prime_structure, v))
        .collect()
}
