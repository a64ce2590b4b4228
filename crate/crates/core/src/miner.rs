//! Dative-alternation detection and counting over dependency parses.
//!
//! The dependency pattern is a reconstruction over Universal Dependencies
//! labels: a DO sentence is a verb with `iobj` and `obj` dependents; a PD
//! sentence is a lexicon verb with an `obj` dependent and an `obl` dependent
//! whose `case` marker is "to" or "for". Other label schemes are handled
//! through [`LabelMap`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::conllu::{ConlluError, ConlluReader, ParsedSentence, ParsedToken};
use crate::sentence::Structure;

pub const IO_PRONOUNS: [&str; 7] = ["you", "me", "us", "him", "them", "it", "her"];
pub const PD_CASE_LEMMAS: [&str; 2] = ["to", "for"];

/// Relation names as they appear in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelMap {
    pub iobj: String,
    pub obj: String,
    pub obl: String,
    pub case: String,
    pub verb_upos: String,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self {
            iobj: "iobj".into(),
            obj: "obj".into(),
            obl: "obl".into(),
            case: "case".into(),
            verb_upos: "VERB".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub verb: ParsedToken,
    /// The recipient: the `iobj` for DO, the `obl` nominal for PD.
    pub iobj: ParsedToken,
    pub dobj: ParsedToken,
    pub structure: Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MinerError {
    #[error("sentence at line {line}: token {token} has head {head}, which does not exist")]
    DanglingHead { line: usize, token: usize, head: usize },
}

pub struct Detector {
    labels: LabelMap,
    verbs: BTreeSet<String>,
}

impl Detector {
    /// `verbs` are the ditransitive lemmas accepted for PD detection.
    pub fn new(verbs: impl IntoIterator<Item = impl Into<String>>, labels: LabelMap) -> Self {
        Self {
            labels,
            verbs: verbs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn from_lexicon(lexicon: &crate::lexicon::Lexicon, labels: LabelMap) -> Self {
        Self::new(lexicon.verbs().iter().map(|v| v.lemma.clone()), labels)
    }

    fn validate(sentence: &ParsedSentence) -> Result<(), MinerError> {
        for t in &sentence.tokens {
            if t.head != 0 && sentence.token(t.head).is_none() {
                return Err(MinerError::DanglingHead {
                    line: sentence.line,
                    token: t.index,
                    head: t.head,
                });
            }
        }
        Ok(())
    }

    fn has_rel(&self, t: &ParsedToken, rel: &str) -> bool {
        t.deprel == rel || t.base_deprel() == rel
    }

    /// At most one detection per verb token; DO wins when both patterns hold.
    pub fn detect(&self, sentence: &ParsedSentence) -> Result<Vec<Detection>, MinerError> {
        Self::validate(sentence)?;
        let l = &self.labels;
        let mut out = Vec::new();
        for verb in sentence.tokens.iter().filter(|t| t.upos == l.verb_upos) {
            let deps: Vec<&ParsedToken> = sentence.dependents(verb.index).collect();
            let first = |rel: &str| deps.iter().find(|d| self.has_rel(d, rel)).copied();
            let Some(obj) = first(&l.obj) else { continue };
            if let Some(iobj) = first(&l.iobj) {
                out.push(Detection {
                    verb: verb.clone(),
                    iobj: iobj.clone(),
                    dobj: obj.clone(),
                    structure: Structure::DoubleObject,
                });
                continue;
            }
            if !self.verbs.contains(&verb.lemma.to_lowercase()) {
                continue;
            }
            let pd_obl = deps.iter().find(|d| {
                self.has_rel(d, &l.obl)
                    && sentence.dependents(d.index).any(|c| {
                        self.has_rel(c, &l.case) && PD_CASE_LEMMAS.contains(&c.lemma.to_lowercase().as_str())
                    })
            });
            if let Some(obl) = pd_obl {
                out.push(Detection {
                    verb: verb.clone(),
                    iobj: (*obl).clone(),
                    dobj: obj.clone(),
                    structure: Structure::Prepositional,
                });
            }
        }
        Ok(out)
    }
}

/// Counts keyed by a label; `total` is always the sum of `counts`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl FrequencyTable {
    pub fn add(&mut self, key: &str, n: u64) {
        *self.counts.entry(key.to_string()).or_default() += n;
        self.total += n;
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (k, v) in &other.counts {
            self.add(k, *v);
        }
        self
    }

    /// Entries by descending count, ties by key.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(k, n)| (k.as_str(), *n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

/// Problems met while mining; none of them stop the stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MiningIssues {
    pub decode: Vec<ConlluError>,
    pub malformed: Vec<MinerError>,
}

impl MiningIssues {
    pub fn is_empty(&self) -> bool {
        self.decode.is_empty() && self.malformed.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronounCounts {
    pub pronouns: FrequencyTable,
    /// DO indirect objects outside the pronoun set.
    pub other: u64,
    pub do_detections: u64,
    pub issues: MiningIssues,
}

fn for_each_detection(
    input: impl BufRead,
    detector: &Detector,
    issues: &mut MiningIssues,
    mut f: impl FnMut(&Detection),
) {
    for sentence in ConlluReader::new(input) {
        match sentence {
            Ok(s) => match detector.detect(&s) {
                Ok(ds) => ds.iter().for_each(&mut f),
                Err(e) => issues.malformed.push(e),
            },
            Err(e) => issues.decode.push(e),
        }
    }
}

/// Counts pronoun forms among DO indirect objects.
pub fn count_io_pronouns(input: impl BufRead, detector: &Detector) -> PronounCounts {
    let mut out = PronounCounts::default();
    let mut issues = MiningIssues::default();
    for_each_detection(input, detector, &mut issues, |d| {
        if d.structure != Structure::DoubleObject {
            return;
        }
        out.do_detections += 1;
        let form = d.iobj.form.to_lowercase();
        if IO_PRONOUNS.contains(&form.as_str()) {
            out.pronouns.add(&form, 1);
        } else {
            out.other += 1;
        }
    });
    out.issues = issues;
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerbStructureCounts {
    /// Per lexicon verb, counts keyed "DO" and "PD"; absent verbs have a
    /// zero row.
    pub verbs: BTreeMap<String, FrequencyTable>,
    pub issues: MiningIssues,
}

/// DO and PD detection counts for each lexicon verb.
pub fn verb_structure_ratio(input: impl BufRead, detector: &Detector) -> VerbStructureCounts {
    let mut verbs: BTreeMap<String, FrequencyTable> = detector
        .verbs
        .iter()
        .map(|v| {
            let mut t = FrequencyTable::default();
            t.add(Structure::DoubleObject.as_str(), 0);
            t.add(Structure::Prepositional.as_str(), 0);
            (v.clone(), t)
        })
        .collect();
    let mut issues = MiningIssues::default();
    for_each_detection(input, detector, &mut issues, |d| {
        if let Some(t) = verbs.get_mut(&d.verb.lemma.to_lowercase()) {
            t.add(d.structure.as_str(), 1);
        }
    });
    VerbStructureCounts { verbs, issues }
}

pub fn pronouns_csv(counts: &PronounCounts) -> String {
    let mut s = String::from("pronoun,count,share\n");
    for (k, n) in counts.pronouns.ranked() {
        s.push_str(&format!("{k},{n},{:.4}\n", n as f64 / counts.pronouns.total as f64));
    }
    s
}

pub fn verb_ratio_csv(counts: &VerbStructureCounts) -> String {
    let mut s = String::from("verb,do,pd,total,pd_share\n");
    for (verb, t) in &counts.verbs {
        let share = if t.total == 0 {
            String::new()
        } else {
            format!("{:.4}", t.get("PD") as f64 / t.total as f64)
        };
        s.push_str(&format!("{verb},{},{},{},{share}\n", t.get("DO"), t.get("PD"), t.total));
    }
    s
}
