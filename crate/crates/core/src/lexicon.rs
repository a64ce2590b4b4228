//! Declarative lexicon for dative-alternation corpora.
//!
//! A lexicon file is TOML with three top-level arrays of tables:
//!
//! ```toml
//! [[verbs]]
//! lemma = "buy"
//! past = "bought"
//! prep = "for"
//! frames.subject = ["girl"]
//! frames.dobj = ["coffee"]
//! frames.iobj = ["guy"]
//!
//! [[nouns]]
//! lemma = "girl"
//!
//! [[pronouns]]
//! form = "him"
//! weight = 2210
//! ```
//!
//! `nouns` entries may carry `determiner = false` for bare nouns. `pronouns`
//! is optional and defaults to [`PronounTable::english_default`].

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Parse(String),
    #[error("invalid lexicon entry `{entry}`: {reason}")]
    Invalid { entry: String, reason: String },
}

impl LexiconError {
    fn invalid(entry: impl Into<String>, reason: impl Into<String>) -> Self {
        LexiconError::Invalid {
            entry: entry.into(),
            reason: reason.into(),
        }
    }
}

/// Preposition introducing the recipient in the prepositional dative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preposition {
    To,
    For,
}

impl Preposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Preposition::To => "to",
            Preposition::For => "for",
        }
    }
}

impl fmt::Display for Preposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preposition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "to" => Ok(Preposition::To),
            "for" => Ok(Preposition::For),
            other => Err(format!("unknown preposition `{other}` (expected `to` or `for`)")),
        }
    }
}

/// Nouns admissible in each argument slot of a verb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbFrame {
    pub subject: BTreeSet<String>,
    pub dobj: BTreeSet<String>,
    pub iobj: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbEntry {
    pub lemma: String,
    pub past: String,
    pub prep: Preposition,
    pub frame: VerbFrame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Noun {
    pub lemma: String,
    /// Whether the noun takes an article ("a girl") or is used bare.
    pub determiner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pronoun {
    pub form: String,
    pub weight: f64,
}

/// Weighted closed set of pronouns used to replace indirect objects.
#[derive(Debug, Clone, PartialEq)]
pub struct PronounTable {
    entries: Vec<Pronoun>,
}

impl PronounTable {
    /// Builds a table, rejecting empty input and non-positive weights.
    pub fn new(entries: Vec<Pronoun>) -> Result<Self, LexiconError> {
        if entries.is_empty() {
            return Err(LexiconError::invalid("pronouns", "pronoun table is empty"));
        }
        let mut seen = HashSet::new();
        for p in &entries {
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(LexiconError::invalid(
                    &p.form,
                    format!("pronoun weight must be positive, got {}", p.weight),
                ));
            }
            if !seen.insert(p.form.as_str()) {
                return Err(LexiconError::invalid(&p.form, "duplicate pronoun form"));
            }
        }
        Ok(Self { entries })
    }

    /// Indirect-object pronoun frequencies counted over dependency-parsed
    /// web text (dative-alternation sentences only).
    pub fn english_default() -> Self {
        let entries = [
            ("you", 4621.0),
            ("me", 2962.0),
            ("us", 2959.0),
            ("him", 2210.0),
            ("them", 1847.0),
            ("it", 1297.0),
            ("her", 738.0),
        ]
        .into_iter()
        .map(|(form, weight)| Pronoun {
            form: form.to_string(),
            weight,
        })
        .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[Pronoun] {
        &self.entries
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|p| p.weight).sum()
    }

    pub fn contains(&self, form: &str) -> bool {
        self.entries.iter().any(|p| p.form == form)
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    verbs: Vec<Arc<VerbEntry>>,
    nouns: Vec<Noun>,
    pronouns: PronounTable,
}

impl Lexicon {
    /// Validates and assembles a lexicon.
    pub fn new(
        verbs: Vec<VerbEntry>,
        nouns: Vec<Noun>,
        pronouns: PronounTable,
    ) -> Result<Self, LexiconError> {
        if verbs.is_empty() {
            return Err(LexiconError::invalid("verbs", "verb list is empty"));
        }
        let mut noun_set = HashSet::new();
        for n in &nouns {
            if n.lemma.is_empty() || n.lemma.contains(char::is_whitespace) {
                return Err(LexiconError::invalid(
                    &n.lemma,
                    "noun lemma must be a single non-empty word",
                ));
            }
            if !noun_set.insert(n.lemma.as_str()) {
                return Err(LexiconError::invalid(&n.lemma, "duplicate noun lemma"));
            }
        }
        let mut lemmas = HashSet::new();
        let mut pasts = HashSet::new();
        for v in &verbs {
            if !lemmas.insert(v.lemma.as_str()) {
                return Err(LexiconError::invalid(&v.lemma, "duplicate verb lemma"));
            }
            if v.past.is_empty() || v.past.contains(char::is_whitespace) {
                return Err(LexiconError::invalid(
                    &v.lemma,
                    "past-tense form must be a single non-empty word",
                ));
            }
            if !pasts.insert(v.past.as_str()) {
                return Err(LexiconError::invalid(
                    &v.lemma,
                    format!("past-tense form `{}` is shared with another verb", v.past),
                ));
            }
            for (slot, set) in [
                ("subject", &v.frame.subject),
                ("dobj", &v.frame.dobj),
                ("iobj", &v.frame.iobj),
            ] {
                if set.is_empty() {
                    return Err(LexiconError::invalid(
                        &v.lemma,
                        format!("empty {slot} frame"),
                    ));
                }
                if let Some(unknown) = set.iter().find(|n| !noun_set.contains(n.as_str())) {
                    return Err(LexiconError::invalid(
                        &v.lemma,
                        format!("{slot} frame names unknown noun `{unknown}`"),
                    ));
                }
            }
        }
        Ok(Self {
            verbs: verbs.into_iter().map(Arc::new).collect(),
            nouns,
            pronouns,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LexiconError> {
        let raw: RawLexicon =
            toml::from_str(text).map_err(|e| LexiconError::Parse(e.to_string()))?;
        raw.into_lexicon()
    }

    pub fn verbs(&self) -> &[Arc<VerbEntry>] {
        &self.verbs
    }

    pub fn nouns(&self) -> &[Noun] {
        &self.nouns
    }

    pub fn pronouns(&self) -> &PronounTable {
        &self.pronouns
    }

    pub fn verb(&self, lemma: &str) -> Option<&Arc<VerbEntry>> {
        self.verbs.iter().find(|v| v.lemma == lemma)
    }

    pub fn verb_by_past(&self, past: &str) -> Option<&Arc<VerbEntry>> {
        self.verbs.iter().find(|v| v.past == past)
    }

    pub fn noun(&self, lemma: &str) -> Option<&Noun> {
        self.nouns.iter().find(|n| n.lemma == lemma)
    }
}

/// Reads and validates a lexicon file.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Lexicon::from_toml_str(&text)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLexicon {
    verbs: Vec<RawVerb>,
    nouns: Vec<RawNoun>,
    #[serde(default)]
    pronouns: Option<Vec<RawPronoun>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerb {
    lemma: String,
    past: String,
    prep: String,
    frames: RawFrames,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrames {
    subject: Vec<String>,
    dobj: Vec<String>,
    iobj: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoun {
    lemma: String,
    #[serde(default = "default_true")]
    determiner: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPronoun {
    form: String,
    weight: f64,
}

fn default_true() -> bool {
    true
}

impl RawLexicon {
    fn into_lexicon(self) -> Result<Lexicon, LexiconError> {
        let verbs = self
            .verbs
            .into_iter()
            .map(|v| {
                let prep = v
                    .prep
                    .parse()
                    .map_err(|reason| LexiconError::invalid(&v.lemma, reason))?;
                Ok(VerbEntry {
                    lemma: v.lemma,
                    past: v.past,
                    prep,
                    frame: VerbFrame {
                        subject: v.frames.subject.into_iter().collect(),
                        dobj: v.frames.dobj.into_iter().collect(),
                        iobj: v.frames.iobj.into_iter().collect(),
                    },
                })
            })
            .collect::<Result<Vec<_>, LexiconError>>()?;
        let nouns = self
            .nouns
            .into_iter()
            .map(|n| Noun {
                lemma: n.lemma,
                determiner: n.determiner,
            })
            .collect();
        let pronouns = match self.pronouns {
            Some(list) => PronounTable::new(
                list.into_iter()
                    .map(|p| Pronoun {
                        form: p.form,
                        weight: p.weight,
                    })
                    .collect(),
            )?,
            None => PronounTable::english_default(),
        };
        Lexicon::new(verbs, nouns, pronouns)
    }
}
