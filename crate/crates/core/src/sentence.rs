//! Dative sentence content and its DO/PD surface realizations.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lexicon::{Lexicon, VerbEntry};

/// The two realizations of the dative alternation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    /// Double object: subject verb recipient theme.
    #[serde(rename = "DO")]
    DoubleObject,
    /// Prepositional dative: subject verb theme prep recipient.
    #[serde(rename = "PD")]
    Prepositional,
}

impl Structure {
    pub const BOTH: [Structure; 2] = [Structure::Prepositional, Structure::DoubleObject];

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::DoubleObject => "DO",
            Structure::Prepositional => "PD",
        }
    }

    pub fn opposite(self) -> Structure {
        match self {
            Structure::DoubleObject => Structure::Prepositional,
            Structure::Prepositional => Structure::DoubleObject,
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Structure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DO" | "do" => Ok(Structure::DoubleObject),
            "PD" | "pd" => Ok(Structure::Prepositional),
            other => Err(format!("unknown structure `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Determiner {
    /// "a" or "an", chosen by the noun's first letter.
    Indefinite,
    Definite,
    /// Bare noun.
    None,
}

impl Determiner {
    fn render(self, noun: &str) -> Option<&'static str> {
        match self {
            Determiner::Indefinite => {
                let vowel = noun
                    .chars()
                    .next()
                    .is_some_and(|c| matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u'));
                Some(if vowel { "an" } else { "a" })
            }
            Determiner::Definite => Some("the"),
            Determiner::None => None,
        }
    }
}

/// Determiner phrase: an article plus a common noun.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dp {
    pub determiner: Determiner,
    pub noun: String,
}

impl Dp {
    pub fn new(determiner: Determiner, noun: impl Into<String>) -> Self {
        Self {
            determiner,
            noun: noun.into(),
        }
    }

    fn push_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let Some(det) = self.determiner.render(&self.noun) {
            out.push(det);
        }
        out.push(&self.noun);
    }
}

/// Indirect object: a full DP or a pronoun.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Recipient {
    Dp(Dp),
    Pronoun(String),
}

impl Recipient {
    pub fn noun(&self) -> Option<&str> {
        match self {
            Recipient::Dp(dp) => Some(&dp.noun),
            Recipient::Pronoun(_) => None,
        }
    }

    fn push_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Recipient::Dp(dp) => dp.push_words(out),
            Recipient::Pronoun(p) => out.push(p),
        }
    }
}

/// Slot fillers of a dative sentence, independent of its structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceContent {
    pub subject: Dp,
    pub verb: Arc<VerbEntry>,
    pub dobj: Dp,
    pub iobj: Recipient,
}

impl SentenceContent {
    /// Content words (noun lemmas and verb lemma) that count for lexical overlap.
    pub fn content_words(&self) -> Vec<&str> {
        let mut words = vec![self.subject.noun.as_str(), self.verb.lemma.as_str(), self.dobj.noun.as_str()];
        if let Some(n) = self.iobj.noun() {
            words.push(n);
        }
        words
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DativeSentence {
    pub content: SentenceContent,
    pub structure: Structure,
    /// Surface string without terminal punctuation.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentenceError {
    #[error("noun `{noun}` is not admissible as {slot} of `{verb}`")]
    FrameViolation {
        verb: String,
        slot: &'static str,
        noun: String,
    },
    #[error("cannot parse `{text}`: {reason}")]
    Unparseable { text: String, reason: String },
}

/// Renders sentence content in the requested structure.
///
/// DO: `subject verb iobj dobj`; PD: `subject verb dobj prep iobj`. The first
/// letter is capitalized and no terminal punctuation is added.
pub fn realize(content: &SentenceContent, structure: Structure) -> Result<DativeSentence, SentenceError> {
    let verb = &content.verb;
    let check = |slot: &'static str, set: &std::collections::BTreeSet<String>, noun: &str| {
        if set.contains(noun) {
            Ok(())
        } else {
            Err(SentenceError::FrameViolation {
                verb: verb.lemma.clone(),
                slot,
                noun: noun.to_string(),
            })
        }
    };
    check("subject", &verb.frame.subject, &content.subject.noun)?;
    check("direct object", &verb.frame.dobj, &content.dobj.noun)?;
    if let Some(n) = content.iobj.noun() {
        check("indirect object", &verb.frame.iobj, n)?;
    }

    let mut words = Vec::with_capacity(10);
    content.subject.push_words(&mut words);
    words.push(&verb.past);
    match structure {
        Structure::DoubleObject => {
            content.iobj.push_words(&mut words);
            content.dobj.push_words(&mut words);
        }
        Structure::Prepositional => {
            content.dobj.push_words(&mut words);
            words.push(verb.prep.as_str());
            content.iobj.push_words(&mut words);
        }
    }
    let joined = words.join(" ");
    let mut chars = joined.chars();
    let text = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    Ok(DativeSentence {
        content: content.clone(),
        structure,
        text,
    })
}

/// Recovers slots and structure from a realized surface string.
///
/// Inverse of [`realize`] for sentences built from `lexicon`; a trailing
/// period is tolerated.
pub fn parse_surface(text: &str, lexicon: &Lexicon) -> Result<DativeSentence, SentenceError> {
    let fail = |reason: &str| SentenceError::Unparseable {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let body = text.trim().trim_end_matches('.');
    let words: Vec<String> = body
        .split_whitespace()
        .enumerate()
        .map(|(i, w)| if i == 0 { decapitalize(w) } else { w.to_string() })
        .collect();
    let verb_pos = words
        .iter()
        .position(|w| lexicon.verb_by_past(w).is_some())
        .ok_or_else(|| fail("no known verb form"))?;
    let verb = lexicon.verb_by_past(&words[verb_pos]).cloned().expect("checked above");

    let mut left = Cursor::new(&words[..verb_pos]);
    let subject = left.dp(lexicon).ok_or_else(|| fail("bad subject"))?;
    if !left.done() {
        return Err(fail("trailing words before verb"));
    }

    let rest = &words[verb_pos + 1..];
    let prep_pos = rest.iter().position(|w| w == verb.prep.as_str());
    let (structure, dobj, iobj) = match prep_pos {
        Some(p) => {
            let mut before = Cursor::new(&rest[..p]);
            let dobj = before.dp(lexicon).ok_or_else(|| fail("bad direct object"))?;
            let mut after = Cursor::new(&rest[p + 1..]);
            let iobj = after.recipient(lexicon).ok_or_else(|| fail("bad indirect object"))?;
            if !before.done() || !after.done() {
                return Err(fail("unexpected words in PD frame"));
            }
            (Structure::Prepositional, dobj, iobj)
        }
        None => {
            let mut cur = Cursor::new(rest);
            let iobj = cur.recipient(lexicon).ok_or_else(|| fail("bad indirect object"))?;
            let dobj = cur.dp(lexicon).ok_or_else(|| fail("bad direct object"))?;
            if !cur.done() {
                return Err(fail("unexpected words in DO frame"));
            }
            (Structure::DoubleObject, dobj, iobj)
        }
    };
    Ok(DativeSentence {
        content: SentenceContent {
            subject,
            verb,
            dobj,
            iobj,
        },
        structure,
        text: body.to_string(),
    })
}

fn decapitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(first) => first.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Cursor<'a> {
    words: &'a [String],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(words: &'a [String]) -> Self {
        Self { words, pos: 0 }
    }

    fn done(&self) -> bool {
        self.pos == self.words.len()
    }

    fn dp(&mut self, lexicon: &Lexicon) -> Option<Dp> {
        let first = self.words.get(self.pos)?;
        let det = match first.as_str() {
            "a" | "an" => Some(Determiner::Indefinite),
            "the" => Some(Determiner::Definite),
            _ => None,
        };
        match det {
            Some(d) => {
                let noun = self.words.get(self.pos + 1)?;
                lexicon.noun(noun)?;
                self.pos += 2;
                Some(Dp::new(d, noun.clone()))
            }
            None => {
                lexicon.noun(first)?;
                self.pos += 1;
                Some(Dp::new(Determiner::None, first.clone()))
            }
        }
    }

    fn recipient(&mut self, lexicon: &Lexicon) -> Option<Recipient> {
        let first = self.words.get(self.pos)?;
        if lexicon.pronouns().contains(first) && lexicon.noun(first).is_none() {
            self.pos += 1;
            return Some(Recipient::Pronoun(first.clone()));
        }
        self.dp(lexicon).map(Recipient::Dp)
    }
}
