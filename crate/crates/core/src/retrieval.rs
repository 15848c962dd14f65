//! Okapi BM25 over an inverted index of tokenized document bodies.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{tokenize, Corpus, Vocabulary, NUM_SPECIAL};
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index. `postings[t]` lists documents containing term id `t` in
/// ascending ordinal order. Special tokens are never indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    postings: Vec<Vec<Posting>>,
    doc_len: Vec<u32>,
    doc_terms: Vec<Vec<u32>>,
    doc_ids: Vec<String>,
    avg_doc_len: f64,
    k1: f64,
    b: f64,
}

fn mean_len(doc_len: &[u32]) -> f64 {
    let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
    total as f64 / doc_len.len() as f64
}

impl Bm25Index {
    /// Builds the index from already tokenized documents.
    pub fn from_token_docs(
        docs: Vec<Vec<u32>>,
        doc_ids: Vec<String>,
        vocab_size: usize,
        k1: f64,
        b: f64,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if docs.len() != doc_ids.len() {
            return Err(Error::LengthMismatch {
                left: docs.len(),
                right: doc_ids.len(),
            });
        }
        let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); vocab_size];
        let mut counts = vec![0u32; vocab_size];
        let mut touched = Vec::new();
        for (ordinal, toks) in docs.iter().enumerate() {
            for &t in toks {
                if t < NUM_SPECIAL {
                    continue;
                }
                let slot = counts.get_mut(t as usize).ok_or_else(|| {
                    Error::InvalidArgument(alloc::format!("token id {t} outside vocabulary"))
                })?;
                if *slot == 0 {
                    touched.push(t);
                }
                *slot += 1;
            }
            touched.sort_unstable();
            for &t in &touched {
                postings[t as usize].push(Posting {
                    doc: ordinal as u32,
                    tf: counts[t as usize],
                });
                counts[t as usize] = 0;
            }
            touched.clear();
        }
        let doc_len: Vec<u32> = docs.iter().map(|d| d.len() as u32).collect();
        Ok(Bm25Index {
            avg_doc_len: mean_len(&doc_len),
            postings,
            doc_len,
            doc_terms: docs,
            doc_ids,
            k1,
            b,
        })
    }

    pub fn with_params(mut self, k1: f64, b: f64) -> Self {
        self.k1 = k1;
        self.b = b;
        self
    }

    pub fn n_docs(&self) -> usize {
        self.doc_len.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn doc_len(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Token sequence of document `doc` as indexed.
    pub fn doc_terms(&self, doc: usize) -> &[u32] {
        &self.doc_terms[doc]
    }

    pub fn vocab_size(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, term: u32) -> &[Posting] {
        self.postings
            .get(term as usize)
            .map_or(&[][..], Vec::as_slice)
    }

    pub fn doc_freq(&self, term: u32) -> usize {
        self.postings(term).len()
    }

    pub fn idf(&self, term: u32) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.doc_freq(term) as f64;
        math::ln((n - df + 0.5) / (df + 0.5) + 1.0)
    }

    fn tf_weight(&self, tf: u32, doc: usize) -> f64 {
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_len[doc]);
        tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len))
    }

    fn term_freq(&self, term: u32, doc: usize) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&(doc as u32), |p| p.doc)
            .map_or(0, |i| list[i].tf)
    }

    pub fn bm25_score(&self, query: &[u32], doc: usize) -> f64 {
        let mut score = 0.0;
        for (term, qtf) in query_terms(query) {
            let tf = self.term_freq(term, doc);
            if tf > 0 {
                score += f64::from(qtf) * self.idf(term) * self.tf_weight(tf, doc);
            }
        }
        score
    }

    /// Scores every document for `query` at once through the postings.
    /// Per document the additions happen in the same order as in
    /// [`Bm25Index::bm25_score`], so both paths agree bit for bit.
    pub fn score_all(&self, query: &[u32]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_docs()];
        for (term, qtf) in query_terms(query) {
            let idf = self.idf(term);
            for p in self.postings(term) {
                let doc = p.doc as usize;
                scores[doc] += f64::from(qtf) * idf * self.tf_weight(p.tf, doc);
            }
        }
        scores
    }

    /// Nearest documents to `doc` using its own token sequence as the query,
    /// best first, ties by ascending ordinal, `doc` itself excluded.
    pub fn most_similar(&self, doc: usize, k: usize) -> Result<Vec<usize>> {
        if self.n_docs() < 2 {
            return Err(Error::NoNeighbor);
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if doc >= self.n_docs() {
            return Err(Error::InvalidArgument(alloc::format!(
                "document ordinal {doc} out of range"
            )));
        }
        let scores = self.score_all(&self.doc_terms[doc]);
        let mut ranked: Vec<usize> = (0..self.n_docs()).filter(|&d| d != doc).collect();
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        ranked.truncate(k.min(self.n_docs() - 1));
        Ok(ranked)
    }
}

/// Distinct non-special query terms in ascending id order with their counts.
fn query_terms(query: &[u32]) -> Vec<(u32, u32)> {
    let mut sorted: Vec<u32> = query.iter().copied().filter(|&t| t >= NUM_SPECIAL).collect();
    sorted.sort_unstable();
    let mut out: Vec<(u32, u32)> = Vec::new();
    for t in sorted {
        match out.last_mut() {
            Some((last, n)) if *last == t => *n += 1,
            _ => out.push((t, 1)),
        }
    }
    out
}

/// Indexes the tokenized bodies (not summaries) of `corpus`.
pub fn build_index(corpus: &Corpus, vocab: &Vocabulary) -> Result<Bm25Index> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let docs = corpus
        .documents()
        .iter()
        .map(|d| tokenize(&d.text, vocab))
        .collect();
    let ids = corpus.documents().iter().map(|d| d.id.clone()).collect();
    Bm25Index::from_token_docs(docs, ids, vocab.len(), DEFAULT_K1, DEFAULT_B)
}
