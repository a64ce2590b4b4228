//! Streaming CoNLL-U reader.
//!
//! Yields one sentence at a time; memory is bounded by sentence length.
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped. A bad
//! line produces an error carrying its line number, the rest of that sentence
//! is dropped, and reading resumes at the next sentence.

use std::io::BufRead;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedToken {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 0 is the root.
    pub head: usize,
    pub deprel: String,
}

impl ParsedToken {
    /// Universal part of the relation: `obl:tmod` → `obl`.
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSentence {
    pub sent_id: Option<String>,
    /// Line number of the first token line.
    pub line: usize,
    pub tokens: Vec<ParsedToken>,
}

impl ParsedSentence {
    pub fn token(&self, index: usize) -> Option<&ParsedToken> {
        self.tokens.iter().find(|t| t.index == index)
    }

    pub fn dependents(&self, head: usize) -> impl Iterator<Item = &ParsedToken> {
        self.tokens.iter().filter(move |t| t.head == head)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConlluError {
    #[error("line {line}: {msg}")]
    Decode { line: usize, msg: String },
    #[error("line {line}: read failed: {msg}")]
    Io { line: usize, msg: String },
}

impl ConlluError {
    pub fn line(&self) -> usize {
        match self {
            Self::Decode { line, .. } | Self::Io { line, .. } => *line,
        }
    }
}

pub struct ConlluReader<R> {
    input: R,
    line_no: usize,
    buf: String,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
            done: false,
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>, ConlluError> {
        self.buf.clear();
        self.line_no += 1;
        match self.input.read_line(&mut self.buf) {
            Ok(0) => Ok(None),
            Ok(_) => Ok(Some(self.buf.trim_end_matches(['\n', '\r']))),
            Err(e) => Err(ConlluError::Io {
                line: self.line_no,
                msg: e.to_string(),
            }),
        }
    }

    /// Consumes lines up to the next blank line or end of input.
    fn skip_sentence(&mut self) {
        loop {
            match self.next_line() {
                Ok(Some(l)) if !l.trim().is_empty() => {}
                Ok(_) => return,
                Err(_) => {
                    self.done = true;
                    return;
                }
            }
        }
    }
}

fn parse_token(line: &str, line_no: usize) -> Result<Option<ParsedToken>, ConlluError> {
    let err = |msg: String| ConlluError::Decode { line: line_no, msg };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(err(format!("expected 10 tab-separated columns, found {}", cols.len())));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let index: usize = id.parse().map_err(|_| err(format!("bad token id `{id}`")))?;
    if index == 0 {
        return Err(err("token id 0 is reserved for the root".into()));
    }
    let head: usize = cols[6].parse().map_err(|_| err(format!("bad head `{}`", cols[6])))?;
    Ok(Some(ParsedToken {
        index,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        head,
        deprel: cols[7].to_string(),
    }))
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedSentence, ConlluError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut sentence = ParsedSentence::default();
        loop {
            let line_no = self.line_no + 1;
            let line = match self.next_line() {
                Ok(Some(l)) => l.to_string(),
                Ok(None) => {
                    self.done = true;
                    return (!sentence.tokens.is_empty()).then_some(Ok(sentence));
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            if line.trim().is_empty() {
                if sentence.tokens.is_empty() {
                    sentence.sent_id = None;
                    continue;
                }
                return Some(Ok(sentence));
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment.trim().strip_prefix("sent_id") {
                    sentence.sent_id = Some(id.trim_start_matches([' ', '=']).trim().to_string());
                }
                continue;
            }
            match parse_token(&line, line_no) {
                Ok(Some(tok)) => {
                    if sentence.tokens.is_empty() {
                        sentence.line = line_no;
                    }
                    if sentence.tokens.iter().any(|t| t.index == tok.index) {
                        let e = ConlluError::Decode {
                            line: line_no,
                            msg: format!("duplicate token id {}", tok.index),
                        };
                        self.skip_sentence();
                        return Some(Err(e));
                    }
                    sentence.tokens.push(tok);
                }
                Ok(None) => {}
                Err(e) => {
                    self.skip_sentence();
                    return Some(Err(e));
                }
            }
        }
    }
}
