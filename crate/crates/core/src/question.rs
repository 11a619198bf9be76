//! Question representation: tokenization, the question-type lexicon,
//! prefix/postfix decomposition and fixed-length padding.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Default padded question length.
pub const DEFAULT_MAX_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnswerType {
    #[serde(rename = "yes/no")]
    YesNo,
    #[serde(rename = "number")]
    Num,
    #[serde(rename = "other")]
    Other,
}

impl AnswerType {
    pub const ALL: [AnswerType; 3] = [AnswerType::YesNo, AnswerType::Num, AnswerType::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerType::YesNo => "yes/no",
            AnswerType::Num => "number",
            AnswerType::Other => "other",
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnswerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes/no" | "yesno" | "yes_no" => Ok(AnswerType::YesNo),
            "number" | "num" => Ok(AnswerType::Num),
            "other" => Ok(AnswerType::Other),
            other => Err(Error::Lexicon(format!("unknown answer type {other:?}"))),
        }
    }
}

/// A vocabulary entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub id: u32,
}

/// Output of [`tokenize`]: lowercase word tokens plus whether a terminal
/// question mark was stripped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenized {
    pub words: Vec<String>,
    pub question_mark: bool,
}

/// Lowercases, splits on whitespace and separates punctuation into its own
/// tokens. A single terminal `?` is removed and remembered.
pub fn tokenize(text: &str) -> Result<Tokenized> {
    if text.trim().is_empty() {
        return Err(Error::InvalidQuestion("empty question text".into()));
    }
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                words.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    let question_mark = words.last().is_some_and(|w| w == "?");
    if question_mark {
        words.pop();
    }
    if words.is_empty() {
        return Err(Error::InvalidQuestion(format!("no words in {text:?}")));
    }
    Ok(Tokenized {
        words,
        question_mark,
    })
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    entry: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub phrase: Vec<String>,
    pub answer_type: AnswerType,
}

impl LexiconEntry {
    pub fn text(&self) -> String {
        self.phrase.join(" ")
    }
}

/// Question-type phrases indexed by a token trie for longest-prefix lookup.
#[derive(Debug, Clone)]
pub struct QTypeLexicon {
    entries: Vec<LexiconEntry>,
    nodes: Vec<TrieNode>,
}

impl QTypeLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut nodes = vec![TrieNode::default()];
        for (idx, entry) in entries.iter().enumerate() {
            if entry.phrase.is_empty() || entry.phrase.iter().any(|w| w.is_empty()) {
                return Err(Error::Lexicon(format!("entry {idx} is empty")));
            }
            let mut node = 0;
            for word in &entry.phrase {
                node = match nodes[node].children.get(word) {
                    Some(&next) => next,
                    None => {
                        nodes.push(TrieNode::default());
                        let next = nodes.len() - 1;
                        nodes[node].children.insert(word.clone(), next);
                        next
                    }
                };
            }
            if nodes[node].entry.is_some() {
                return Err(Error::Lexicon(format!(
                    "duplicate entry {:?}",
                    entry.text()
                )));
            }
            nodes[node].entry = Some(idx);
        }
        Ok(Self { entries, nodes })
    }

    /// Builds a lexicon from `(phrase, answer type)` pairs, tokenizing each phrase.
    pub fn from_phrases<'a>(
        phrases: impl IntoIterator<Item = (&'a str, AnswerType)>,
    ) -> Result<Self> {
        let entries = phrases
            .into_iter()
            .map(|(p, answer_type)| {
                let phrase = tokenize(p)
                    .map_err(|_| Error::Lexicon(format!("empty phrase {p:?}")))?
                    .words;
                Ok(LexiconEntry {
                    phrase,
                    answer_type,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Parses the `phrase<TAB>answer_type` line format. Blank lines and `#`
    /// comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (phrase, tag) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                msg: "expected phrase<TAB>answer_type".into(),
            })?;
            let answer_type = tag.parse().map_err(|e: Error| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            pairs.push((phrase.to_string(), answer_type));
        }
        Self::from_phrases(pairs.iter().map(|(p, t)| (p.as_str(), *t)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_file_string(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\n", e.text(), e.answer_type))
            .collect()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn get(&self, idx: usize) -> &LexiconEntry {
        &self.entries[idx]
    }

    /// Index of the entry whose phrase equals `text` (after tokenization).
    pub fn find(&self, text: &str) -> Option<usize> {
        let words = tokenize(text).ok()?.words;
        let mut node = 0;
        for w in &words {
            node = *self.nodes[node].children.get(w)?;
        }
        self.nodes[node].entry
    }

    /// Longest entry that is a token prefix of `tokens`.
    pub fn longest_match(&self, tokens: &[String]) -> Option<usize> {
        let mut node = 0;
        let mut best = None;
        for w in tokens {
            match self.nodes[node].children.get(w) {
                Some(&next) => {
                    node = next;
                    if let Some(e) = self.nodes[node].entry {
                        best = Some(e);
                    }
                }
                None => break,
            }
        }
        best
    }
}

/// Result of splitting a token sequence at its question type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition<'a> {
    pub prefix: &'a [String],
    pub postfix: &'a [String],
    pub qtype: Option<usize>,
}

pub fn decompose<'a>(tokens: &'a [String], lex: &QTypeLexicon) -> Decomposition<'a> {
    let qtype = lex.longest_match(tokens);
    let split = qtype.map_or(0, |q| lex.get(q).phrase.len());
    Decomposition {
        prefix: &tokens[..split],
        postfix: &tokens[split..],
        qtype,
    }
}

/// A tokenized, decomposed question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: u64,
    pub tokens: Vec<String>,
    pub question_mark: bool,
    /// Question-type phrase, when one matched.
    pub qtype: Option<String>,
    prefix_len: usize,
    pub answer_type: AnswerType,
}

impl Question {
    /// Tokenizes and decomposes `text`. An explicit `qtype_hint` that is a
    /// token prefix of the question takes precedence over lexicon lookup.
    pub fn parse(
        id: u64,
        text: &str,
        lex: &QTypeLexicon,
        qtype_hint: Option<&str>,
        answer_type_hint: Option<AnswerType>,
    ) -> Result<Self> {
        let Tokenized {
            words,
            question_mark,
        } = tokenize(text)?;
        let hinted = qtype_hint.and_then(|h| {
            let phrase = tokenize(h).ok()?.words;
            words.starts_with(&phrase).then_some(phrase)
        });
        let (qtype, prefix_len, lex_type) = match hinted {
            Some(phrase) => {
                let lex_type = lex.find(&phrase.join(" ")).map(|i| lex.get(i).answer_type);
                (Some(phrase.join(" ")), phrase.len(), lex_type)
            }
            None => {
                let d = decompose(&words, lex);
                let entry = d.qtype.map(|i| lex.get(i));
                (
                    entry.map(|e| e.text()),
                    d.prefix.len(),
                    entry.map(|e| e.answer_type),
                )
            }
        };
        Ok(Self {
            id,
            tokens: words,
            question_mark,
            qtype,
            prefix_len,
            answer_type: answer_type_hint.or(lex_type).unwrap_or(AnswerType::Other),
        })
    }

    pub fn prefix(&self) -> &[String] {
        &self.tokens[..self.prefix_len]
    }

    pub fn postfix(&self) -> &[String] {
        &self.tokens[self.prefix_len..]
    }

    pub fn qtype_label(&self) -> &str {
        self.qtype.as_deref().unwrap_or("none")
    }

    /// Surface text with the terminal question mark re-appended.
    pub fn render(&self) -> String {
        render_tokens(&self.tokens, self.question_mark)
    }
}

pub fn render_tokens(tokens: &[String], question_mark: bool) -> String {
    let mut s = tokens.join(" ");
    if question_mark {
        s.push('?');
    }
    s
}

/// Word vocabulary. Id 0 is the pad symbol and id 1 the unknown symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    surfaces: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_surfaces(Vec::<String>::new())
    }
}

impl Vocab {
    /// Builds a vocabulary from words in first-seen order.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Self::default();
        for w in words {
            if !vocab.index.contains_key(w) {
                vocab.index.insert(w.to_string(), vocab.surfaces.len() as u32);
                vocab.surfaces.push(w.to_string());
            }
        }
        vocab
    }

    /// Rebuilds a vocabulary from a stored surface list; the reserved symbols
    /// are (re)inserted at ids 0 and 1.
    pub fn from_surfaces<S: AsRef<str>>(surfaces: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = Vocab {
            surfaces: vec![PAD.to_string(), UNK.to_string()],
            index: HashMap::from([(PAD.to_string(), PAD_ID), (UNK.to_string(), UNK_ID)]),
        };
        for s in surfaces {
            let s = s.as_ref();
            if !vocab.index.contains_key(s) {
                vocab.index.insert(s.to_string(), vocab.surfaces.len() as u32);
                vocab.surfaces.push(s.to_string());
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, surface: &str) -> u32 {
        self.index.get(surface).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, surface: &str) -> Token {
        let id = self.id(surface);
        Token {
            surface: self.surfaces[id as usize].clone(),
            id,
        }
    }

    pub fn surface(&self, id: u32) -> &str {
        &self.surfaces[id as usize]
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    /// Maps `tokens` to ids, right-padding with [`PAD_ID`] or truncating to
    /// exactly `len` entries.
    pub fn pad<S: AsRef<str>>(&self, tokens: &[S], len: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = tokens.iter().take(len).map(|t| self.id(t.as_ref())).collect();
        ids.resize(len, PAD_ID);
        ids
    }
}
