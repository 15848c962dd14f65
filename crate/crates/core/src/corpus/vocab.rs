use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Corpus;
use crate::{Error, Result};

pub const CLS: u32 = 0;
pub const SEP: u32 = 1;
pub const PAD: u32 = 2;
pub const UNK: u32 = 3;
pub const NUM_SPECIAL: u32 = 4;
pub const SPECIAL_TOKENS: [&str; 4] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"];

/// Word-level vocabulary. Ids are dense; the four special tokens take ids
/// `0..4` and the remaining ids follow descending corpus frequency, ties
/// broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: BTreeMap<String, u32>,
    min_frequency: u32,
}

impl Vocabulary {
    /// Builds a vocabulary from the ordered list of non-special tokens; the
    /// token at position `i` receives id `i + NUM_SPECIAL`.
    pub fn from_tokens<I, S>(tokens: I, min_frequency: u32) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens.into_iter().map(Into::into));
        let mut token_to_id = BTreeMap::new();
        for (id, tok) in all.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "vocabulary token {tok:?} is empty or contains whitespace"
                )));
            }
            if token_to_id.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "duplicate vocabulary token {tok:?}"
                )));
            }
        }
        Ok(Vocabulary {
            tokens: all,
            token_to_id,
            min_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_frequency(&self) -> u32 {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-special tokens in id order.
    pub fn regular_tokens(&self) -> &[String] {
        &self.tokens[NUM_SPECIAL as usize..]
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// characters off each word as single-character tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let mut lo = 0;
        while lo < chars.len() && is_punct(chars[lo].1) {
            lo += 1;
        }
        let mut hi = chars.len();
        while hi > lo && is_punct(chars[hi - 1].1) {
            hi -= 1;
        }
        for &(_, c) in &chars[..lo] {
            out.push(c.to_string());
        }
        if lo < hi {
            let from = chars[lo].0;
            let to = chars.get(hi).map_or(word.len(), |&(i, _)| i);
            out.push(word[from..to].to_string());
        }
        for &(_, c) in &chars[hi..] {
            out.push(c.to_string());
        }
    }
    out
}

pub fn build_vocab(corpus: &Corpus, min_frequency: u32) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_frequency == 0 {
        return Err(Error::InvalidArgument("min_frequency must be >= 1".into()));
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in corpus.documents() {
        for text in [&doc.text, &doc.reference_summary] {
            for tok in normalize_tokens(text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(tok, n)| *n >= u64::from(min_frequency) && !SPECIAL_TOKENS.contains(&tok.as_str()))
        .collect();
    // BTreeMap iteration is already lexicographic; a stable sort keeps that
    // order among equal counts.
    kept.sort_by(|a, b| b.1.cmp(&a.1));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t), min_frequency)
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    normalize_tokens(text)
        .iter()
        .map(|t| vocab.id(t).unwrap_or(UNK))
        .collect()
}

/// Joins token strings with single spaces; `[UNK]` is rendered literally.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (i, &id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(vocab.token(id).unwrap_or(SPECIAL_TOKENS[UNK as usize]));
    }
    out
}
