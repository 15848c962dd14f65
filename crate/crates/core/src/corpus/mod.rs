//! Corpus ingestion: sentence segmentation, word-level vocabulary and
//! tokenization, plus a seeded synthetic corpus generator.

mod segment;
mod synthetic;
mod vocab;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

pub use segment::{segment_sentences, ABBREVIATIONS};
pub use synthetic::{gen_synthetic_corpus, topic_of};
pub use vocab::{
    build_vocab, detokenize, normalize_tokens, tokenize, Vocabulary, CLS, NUM_SPECIAL, PAD, SEP,
    SPECIAL_TOKENS, UNK,
};

use crate::{Error, Result};

/// A source text together with its reference summary, both pre-segmented.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    pub reference_summary: String,
    pub reference_sentences: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, summary: impl Into<String>) -> Self {
        let text = text.into();
        let reference_summary = summary.into();
        let sentences = segment_sentences(&text);
        let reference_sentences = segment_sentences(&reference_summary);
        Document {
            id: id.into(),
            text,
            sentences,
            reference_summary,
            reference_sentences,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Provenance {
    Real,
    Synthetic,
}

/// An ordered collection of documents with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    provenance: Provenance,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, provenance: Provenance) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (ordinal, doc) in documents.iter().enumerate() {
            if by_id.insert(doc.id.clone(), ordinal).is_some() {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus {
            documents,
            provenance,
            by_id,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, ordinal: usize) -> Option<&Document> {
        self.documents.get(ordinal)
    }

    pub fn ordinal_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}
