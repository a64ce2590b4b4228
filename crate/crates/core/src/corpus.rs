//! Prime/target corpus generation.
//!
//! Every prime verb gets `primes_per_verb` prime sentences and every prime
//! gets `targets_per_prime` targets sharing no content word with it. Each
//! prime derives its own ChaCha stream from the run seed, so primes can be
//! generated independently and in any order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lexicon::{Lexicon, PronounTable, VerbEntry};
use crate::sentence::{realize, Determiner, Dp, Recipient, SentenceContent, SentenceError, Structure};

/// Maximum rejection-sampling attempts for one sentence.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("targets_per_prime and primes_per_verb must be at least 1")]
    BadConfig,
    #[error("lexicon exhausted: no valid sentence for prime `{prime}` after {attempts} attempts")]
    Exhausted { prime: String, attempts: usize },
    #[error("empty pronoun table")]
    EmptyPronounTable,
    #[error(transparent)]
    Sentence(#[from] SentenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PronounCondition {
    WithPronoun,
    NoPronoun,
}

impl PronounCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            PronounCondition::WithPronoun => "WithPronoun",
            PronounCondition::NoPronoun => "NoPronoun",
        }
    }

    /// Rendering used in report tables ("True"/"False").
    pub fn with_pronoun_label(self) -> &'static str {
        match self {
            PronounCondition::WithPronoun => "True",
            PronounCondition::NoPronoun => "False",
        }
    }
}

impl fmt::Display for PronounCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PronounCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "WithPronoun" => Ok(PronounCondition::WithPronoun),
            "NoPronoun" => Ok(PronounCondition::NoPronoun),
            other => Err(format!("unknown pronoun condition `{other}`")),
        }
    }
}

/// Which sentences get pronominal indirect objects under `WithPronoun`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PronounScope {
    PrimesAndTargets,
    PrimesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeterminerPolicy {
    pub prime: Determiner,
    pub target: Determiner,
}

impl Default for DeterminerPolicy {
    fn default() -> Self {
        Self {
            prime: Determiner::Indefinite,
            target: Determiner::Definite,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub primes_per_verb: usize,
    pub targets_per_prime: usize,
    pub condition: PronounCondition,
    pub pronoun_scope: PronounScope,
    pub determiners: DeterminerPolicy,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn new(primes_per_verb: usize, targets_per_prime: usize, condition: PronounCondition, seed: u64) -> Self {
        Self {
            primes_per_verb,
            targets_per_prime,
            condition,
            pronoun_scope: PronounScope::PrimesAndTargets,
            determiners: DeterminerPolicy::default(),
            seed,
        }
    }

    /// Number of pairs the generator will emit for `verb_count` verbs.
    pub fn pair_count(&self, verb_count: usize) -> usize {
        verb_count * self.primes_per_verb * self.targets_per_prime
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTargetPair {
    pub pair_id: String,
    pub condition: PronounCondition,
    pub prime: SentenceContent,
    pub target: SentenceContent,
}

/// One of the four structural combinations of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiation {
    pub prime_structure: Structure,
    pub target_structure: Structure,
    pub prime: String,
    pub target: String,
}

impl PrimeTargetPair {
    /// Expands into t_PD|p_PD, t_PD|p_DO, t_DO|p_PD, t_DO|p_DO.
    pub fn instantiate(&self) -> Result<[Instantiation; 4], SentenceError> {
        let p_pd = realize(&self.prime, Structure::Prepositional)?.text;
        let p_do = realize(&self.prime, Structure::DoubleObject)?.text;
        let t_pd = realize(&self.target, Structure::Prepositional)?.text;
        let t_do = realize(&self.target, Structure::DoubleObject)?.text;
        let inst = |ts, ps, t: &String, p: &String| Instantiation {
            prime_structure: ps,
            target_structure: ts,
            prime: p.clone(),
            target: t.clone(),
        };
        use Structure::{DoubleObject as DO, Prepositional as PD};
        Ok([
            inst(PD, PD, &t_pd, &p_pd),
            inst(PD, DO, &t_pd, &p_do),
            inst(DO, PD, &t_do, &p_pd),
            inst(DO, DO, &t_do, &p_do),
        ])
    }

    pub fn to_record(&self, seed: u64) -> Result<CorpusRecord, SentenceError> {
        Ok(CorpusRecord {
            pair_id: self.pair_id.clone(),
            condition: self.condition,
            prime_do: realize(&self.prime, Structure::DoubleObject)?.text,
            prime_pd: realize(&self.prime, Structure::Prepositional)?.text,
            target_do: realize(&self.target, Structure::DoubleObject)?.text,
            target_pd: realize(&self.target, Structure::Prepositional)?.text,
            prime_verb: self.prime.verb.lemma.clone(),
            target_verb: self.target.verb.lemma.clone(),
            seed,
        })
    }
}

/// One line of the corpus JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub pair_id: String,
    pub condition: PronounCondition,
    pub prime_do: String,
    pub prime_pd: String,
    pub target_do: String,
    pub target_pd: String,
    pub prime_verb: String,
    pub target_verb: String,
    pub seed: u64,
}

impl CorpusRecord {
    pub fn prime(&self, s: Structure) -> &str {
        match s {
            Structure::DoubleObject => &self.prime_do,
            Structure::Prepositional => &self.prime_pd,
        }
    }

    pub fn target(&self, s: Structure) -> &str {
        match s {
            Structure::DoubleObject => &self.target_do,
            Structure::Prepositional => &self.target_pd,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Streams the corpus as JSONL, one [`CorpusRecord`] per line; returns the
/// number of pairs written.
pub fn write_jsonl<W: std::io::Write>(lexicon: &Lexicon, config: &CorpusConfig, mut out: W) -> Result<usize, WriteError> {
    let mut n = 0;
    for pair in generate_corpus(lexicon, config)? {
        let record = pair?.to_record(config.seed).map_err(CorpusError::from)?;
        writeln!(out, "{}", serde_json::to_string(&record).expect("record serializes"))?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

/// Replaces the indirect object with a pronoun drawn proportionally to weight.
pub fn substitute_pronoun<R: Rng + ?Sized>(
    content: &SentenceContent,
    table: &PronounTable,
    rng: &mut R,
) -> Result<SentenceContent, CorpusError> {
    let entries = table.entries();
    if entries.is_empty() {
        return Err(CorpusError::EmptyPronounTable);
    }
    let dist = WeightedIndex::new(entries.iter().map(|p| p.weight)).map_err(|_| CorpusError::EmptyPronounTable)?;
    let pronoun = &entries[dist.sample(rng)].form;
    Ok(SentenceContent {
        iobj: Recipient::Pronoun(pronoun.clone()),
        ..content.clone()
    })
}

/// Lazily generates the corpus; see [`CorpusStream`].
pub fn generate_corpus<'a>(lexicon: &'a Lexicon, config: &CorpusConfig) -> Result<CorpusStream<'a>, CorpusError> {
    if config.primes_per_verb == 0 || config.targets_per_prime == 0 {
        return Err(CorpusError::BadConfig);
    }
    Ok(CorpusStream {
        lexicon,
        config: config.clone(),
        next_prime: 0,
        pending: Vec::new(),
        failed: false,
    })
}

/// Iterator over generated pairs, one prime's worth of targets at a time.
pub struct CorpusStream<'a> {
    lexicon: &'a Lexicon,
    config: CorpusConfig,
    next_prime: usize,
    pending: Vec<PrimeTargetPair>,
    failed: bool,
}

impl Iterator for CorpusStream<'_> {
    type Item = Result<PrimeTargetPair, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.pending.is_empty() {
            let total = self.lexicon.verbs().len() * self.config.primes_per_verb;
            if self.next_prime >= total {
                return None;
            }
            match generate_prime_block(self.lexicon, &self.config, self.next_prime) {
                Ok(mut block) => {
                    block.reverse();
                    self.pending = block;
                    self.next_prime += 1;
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        self.pending.pop().map(Ok)
    }
}

/// Generates the prime with ordinal `ordinal` (verb-major) and all its targets.
pub fn generate_prime_block(
    lexicon: &Lexicon,
    config: &CorpusConfig,
    ordinal: usize,
) -> Result<Vec<PrimeTargetPair>, CorpusError> {
    let verbs = lexicon.verbs();
    let verb = &verbs[ordinal / config.primes_per_verb];
    let prime_index = ordinal % config.primes_per_verb;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(ordinal as u64);

    let prime_label = format!("{}-p{}", verb.lemma, prime_index);
    let pronominal = config.condition == PronounCondition::WithPronoun;
    let mut prime = sample_content(&mut rng, verb, lexicon, config.determiners.prime, &HashSet::new())
        .ok_or_else(|| CorpusError::Exhausted {
            prime: prime_label.clone(),
            attempts: MAX_ATTEMPTS,
        })?;
    if pronominal {
        prime = substitute_pronoun(&prime, lexicon.pronouns(), &mut rng)?;
    }
    let excluded: HashSet<&str> = prime.content_words().into_iter().collect();
    let candidates: Vec<&Arc<VerbEntry>> = verbs.iter().filter(|v| v.lemma != verb.lemma).collect();

    let mut pairs = Vec::with_capacity(config.targets_per_prime);
    for t in 0..config.targets_per_prime {
        let mut target = None;
        for _ in 0..MAX_ATTEMPTS {
            let Some(tv) = candidates.choose(&mut rng) else { break };
            if let Some(c) = sample_once(&mut rng, tv, lexicon, config.determiners.target, &excluded) {
                target = Some(c);
                break;
            }
        }
        let mut target = target.ok_or_else(|| CorpusError::Exhausted {
            prime: prime_label.clone(),
            attempts: MAX_ATTEMPTS,
        })?;
        if pronominal && config.pronoun_scope == PronounScope::PrimesAndTargets {
            target = substitute_pronoun(&target, lexicon.pronouns(), &mut rng)?;
        }
        pairs.push(PrimeTargetPair {
            pair_id: format!("{prime_label}-t{t}"),
            condition: config.condition,
            prime: prime.clone(),
            target,
        });
    }
    Ok(pairs)
}

fn sample_content<R: Rng>(
    rng: &mut R,
    verb: &Arc<VerbEntry>,
    lexicon: &Lexicon,
    det: Determiner,
    excluded: &HashSet<&str>,
) -> Option<SentenceContent> {
    (0..MAX_ATTEMPTS).find_map(|_| sample_once(rng, verb, lexicon, det, excluded))
}

/// One rejection-sampling draw: three distinct admissible nouns avoiding `excluded`.
fn sample_once<R: Rng>(
    rng: &mut R,
    verb: &Arc<VerbEntry>,
    lexicon: &Lexicon,
    det: Determiner,
    excluded: &HashSet<&str>,
) -> Option<SentenceContent> {
    if excluded.contains(verb.lemma.as_str()) {
        return None;
    }
    let pick = |rng: &mut R, set: &std::collections::BTreeSet<String>| -> Option<String> {
        let n = rng.random_range(0..set.len());
        set.iter().nth(n).cloned()
    };
    let subject = pick(rng, &verb.frame.subject)?;
    let dobj = pick(rng, &verb.frame.dobj)?;
    let iobj = pick(rng, &verb.frame.iobj)?;
    if subject == dobj || subject == iobj || dobj == iobj {
        return None;
    }
    if [&subject, &dobj, &iobj].iter().any(|n| excluded.contains(n.as_str())) {
        return None;
    }
    let dp = |noun: String| {
        let d = match lexicon.noun(&noun) {
            Some(n) if !n.determiner => Determiner::None,
            _ => det,
        };
        Dp::new(d, noun)
    };
    Some(SentenceContent {
        subject: dp(subject),
        verb: verb.clone(),
        dobj: dp(dobj),
        iobj: Recipient::Dp(dp(iobj)),
    })
}
